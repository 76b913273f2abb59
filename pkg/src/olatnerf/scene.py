"""On-disk OLAT scene format and its loader.

A scene directory holds one ``scene.json`` manifest plus 8-bit RGB PNG
frames.  The manifest records intrinsics, near/far bounds, camera and light
poses as 4x4 row-major matrices, an optional scene bounding sphere, and a
``frames`` array mapping (view_index, light_index) pairs to image paths.
Missing grid cells are allowed (the frame grid may be sparse), but every
listed frame must resolve to a readable image of the declared size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PinholeCamera, Pose6D

MANIFEST_NAME = "scene.json"


@dataclass
class OlatScene:
    """A set of frames indexed by (viewpoint, light) with shared intrinsics."""

    name: str
    camera: PinholeCamera
    camera_poses: list[Pose6D]
    light_poses: list[Pose6D]
    frames: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    frame_paths: dict[tuple[int, int], str] = field(default_factory=dict)
    t_near: float = 0.1
    t_far: float = 6.0
    bounds_center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bounds_radius: float = 1.0

    @property
    def n_views(self) -> int:
        return len(self.camera_poses)

    @property
    def n_lights(self) -> int:
        return len(self.light_poses)

    def validate(self) -> None:
        if not 0 <= self.t_near < self.t_far:
            raise ValueError("require 0 <= t_near < t_far")
        shape = (self.camera.height, self.camera.width, 3)
        for key in set(self.frames) | set(self.frame_paths):
            n, m = key
            if not (0 <= n < self.n_views and 0 <= m < self.n_lights):
                raise ValueError(f"frame ({n}, {m}) has out-of-range indices")
        for key, img in self.frames.items():
            if img.shape != shape:
                raise ValueError(
                    f"frame {key} has shape {img.shape}, expected {shape}"
                )
            if img.min() < 0.0 or img.max() > 1.0:
                raise ValueError(f"frame {key} has values outside [0, 1]")


def _image_to_float(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def _float_to_image(arr: np.ndarray) -> Image.Image:
    quantized = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(quantized, mode="RGB")


def save_scene(scene: OlatScene, directory) -> Path:
    """Write the manifest and all in-memory frames below ``directory``."""
    scene.validate()
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    frames_entries = []
    for (n, m), img in sorted(scene.frames.items()):
        rel = f"images/frame_v{n:03d}_l{m:03d}.png"
        _float_to_image(img).save(directory / rel)
        frames_entries.append({"view_index": n, "light_index": m, "image": rel})
    manifest = {
        "name": scene.name,
        "intrinsics": {
            "fx": scene.camera.fx,
            "fy": scene.camera.fy,
            "cx": scene.camera.cx,
            "cy": scene.camera.cy,
            "width": scene.camera.width,
            "height": scene.camera.height,
        },
        "near": scene.t_near,
        "far": scene.t_far,
        "bounds": {
            "center": np.asarray(scene.bounds_center, dtype=float).tolist(),
            "radius": float(scene.bounds_radius),
        },
        "camera_poses": [p.to_matrix().tolist() for p in scene.camera_poses],
        "light_poses": [p.to_matrix().tolist() for p in scene.light_poses],
        "frames": frames_entries,
    }
    with open(directory / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return directory


class SceneLoadError(ValueError):
    """Raised when a scene directory fails validation; names the offender."""


def _parse_pose(entry, what: str) -> Pose6D:
    try:
        return Pose6D.from_matrix(np.asarray(entry, dtype=np.float64))
    except (ValueError, TypeError) as exc:
        raise SceneLoadError(f"invalid {what}: {exc}") from exc


def load_scene(directory, images: bool = True) -> OlatScene:
    """Load and validate a scene directory.

    With ``images=False`` only the manifest is parsed and frame files are
    checked for existence, which permits inspecting large captures without
    decoding pixels.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise SceneLoadError(f"missing manifest {manifest_path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneLoadError(f"malformed manifest {manifest_path}: {exc}") from exc

    try:
        intr = manifest["intrinsics"]
        camera = PinholeCamera(
            fx=float(intr["fx"]),
            fy=float(intr["fy"]),
            cx=float(intr["cx"]),
            cy=float(intr["cy"]),
            width=int(intr["width"]),
            height=int(intr["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneLoadError(f"invalid intrinsics in {manifest_path}: {exc}") from exc

    camera_poses = [
        _parse_pose(m, f"camera pose #{i}") for i, m in enumerate(manifest.get("camera_poses", []))
    ]
    light_poses = [
        _parse_pose(m, f"light pose #{i}") for i, m in enumerate(manifest.get("light_poses", []))
    ]

    bounds = manifest.get("bounds") or {}
    scene = OlatScene(
        name=manifest.get("name", directory.name),
        camera=camera,
        camera_poses=camera_poses,
        light_poses=light_poses,
        t_near=float(manifest.get("near", 0.1)),
        t_far=float(manifest.get("far", 6.0)),
        bounds_center=np.asarray(bounds.get("center", [0.0, 0.0, 0.0]), dtype=np.float64),
        bounds_radius=float(bounds.get("radius", manifest.get("far", 6.0) / 2.0)),
    )

    seen = set()
    for entry in manifest.get("frames", []):
        try:
            n, m, rel = int(entry["view_index"]), int(entry["light_index"]), entry["image"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneLoadError(f"malformed frame entry {entry!r}") from exc
        if not (0 <= n < len(camera_poses) and 0 <= m < len(light_poses)):
            raise SceneLoadError(f"frame entry ({n}, {m}) has out-of-range indices")
        if (n, m) in seen:
            raise SceneLoadError(f"duplicate frame entry ({n}, {m})")
        seen.add((n, m))
        path = directory / rel
        if not path.is_file():
            raise SceneLoadError(f"frame ({n}, {m}) references missing image {path}")
        scene.frame_paths[(n, m)] = rel
        if images:
            with Image.open(path) as img:
                arr = _image_to_float(img)
            if arr.shape != (camera.height, camera.width, 3):
                raise SceneLoadError(
                    f"image {path} has shape {arr.shape[:2]}, expected"
                    f" ({camera.height}, {camera.width})"
                )
            scene.frames[(n, m)] = arr

    scene.validate()
    return scene
