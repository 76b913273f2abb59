"""Synthetic OLAT ground truth from a small direct-illumination ray tracer.

Frames are traced with the same pinhole conventions as the renderer: one
primary ray per pixel center, a shadow ray from each hit point to the point
light, and shading

    value = ambient + visibility * intensity * (albedo * max(0, n.l) + specular)

clamped to [0, 1].  The ambient term is an achromatic constant, so fully
shadowed pixels render to exactly the ambient value.  Shadows are hard.
Surfaces are spheres, axis-aligned boxes, small triangle meshes and
axis-aligned textured rectangles (ground and back walls).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import PinholeCamera, Pose6D, backproject, pixel_centers
from .scene import OlatScene

_EPS = 1e-9
_SHADOW_BIAS = 1e-5

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class Material:
    """Constant or checkered albedo plus an optional Blinn-Phong lobe."""

    albedo: np.ndarray | None = None
    checker_colors: np.ndarray | None = None
    checker_scale: float = 1.0
    specular_strength: float = 0.0
    specular_exponent: float = 32.0

    def __post_init__(self):
        if self.albedo is not None:
            self.albedo = np.asarray(self.albedo, dtype=np.float64)
        if self.checker_colors is not None:
            self.checker_colors = np.asarray(self.checker_colors, dtype=np.float64)
        if (self.albedo is None) == (self.checker_colors is None):
            raise ValueError("material needs exactly one of albedo or checker_colors")

    def albedo_at(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.albedo is not None:
            return np.broadcast_to(self.albedo, u.shape + (3,))
        parity = (
            np.floor(u * self.checker_scale) + np.floor(v * self.checker_scale)
        ).astype(np.int64) & 1
        return self.checker_colors[parity]

    def to_dict(self) -> dict:
        d = {
            "specular_strength": self.specular_strength,
            "specular_exponent": self.specular_exponent,
        }
        if self.albedo is not None:
            d["albedo"] = self.albedo.tolist()
        else:
            d["checker_colors"] = self.checker_colors.tolist()
            d["checker_scale"] = self.checker_scale
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Material":
        return cls(
            albedo=d.get("albedo"),
            checker_colors=d.get("checker_colors"),
            checker_scale=d.get("checker_scale", 1.0),
            specular_strength=d.get("specular_strength", 0.0),
            specular_exponent=d.get("specular_exponent", 32.0),
        )


@dataclass
class Sphere:
    name: str
    center: np.ndarray
    radius: float
    material: Material

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        oc = origins - self.center
        b = np.einsum("nk,nk->n", oc, dirs)
        c = np.einsum("nk,nk->n", oc, oc) - self.radius**2
        disc = b * b - c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > _EPS, t0, t1)
        return np.where(hit & (t > _EPS), t, np.inf)

    def shading(self, points: np.ndarray, dirs: np.ndarray):
        normals = (points - self.center) / self.radius
        u = np.arctan2(points[:, 1] - self.center[1], points[:, 0] - self.center[0])
        v = points[:, 2] - self.center[2]
        return normals, self.material.albedo_at(u, v)

    def aabb(self):
        return self.center - self.radius, self.center + self.radius

    def to_dict(self):
        return {
            "type": "sphere",
            "name": self.name,
            "center": self.center.tolist(),
            "radius": self.radius,
            "material": self.material.to_dict(),
        }


@dataclass
class Box:
    name: str
    lo: np.ndarray
    hi: np.ndarray
    material: Material

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if np.any(self.lo >= self.hi):
            raise ValueError("box lo must be strictly below hi on every axis")

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (self.lo - origins) * inv
            t2 = (self.hi - origins) * inv
        tmin = np.nanmax(np.minimum(t1, t2), axis=1)
        tmax = np.nanmin(np.maximum(t1, t2), axis=1)
        t = np.where(tmin > _EPS, tmin, tmax)
        hit = (tmax >= np.maximum(tmin, 0.0)) & (t > _EPS)
        return np.where(hit, t, np.inf)

    def shading(self, points: np.ndarray, dirs: np.ndarray):
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        rel = (points - center) / half
        axis = np.argmax(np.abs(rel), axis=1)
        normals = np.zeros_like(points)
        rows = np.arange(points.shape[0])
        normals[rows, axis] = np.sign(rel[rows, axis])
        return normals, self.material.albedo_at(points[:, 0], points[:, 1])

    def aabb(self):
        return self.lo, self.hi

    def to_dict(self):
        return {
            "type": "box",
            "name": self.name,
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "material": self.material.to_dict(),
        }


@dataclass
class Rect:
    """Axis-aligned textured rectangle, e.g. a ground plane or back wall."""

    name: str
    axis: str
    value: float
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    normal_sign: float
    material: Material

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError("axis must be one of x, y, z")

    def _uv_axes(self):
        k = _AXES[self.axis]
        return [a for a in range(3) if a != k], k

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        (ua, va), k = self._uv_axes()
        dk = dirs[:, k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.value - origins[:, k]) / dk
        pu = origins[:, ua] + t * dirs[:, ua]
        pv = origins[:, va] + t * dirs[:, va]
        hit = (
            (np.abs(dk) > _EPS)
            & (t > _EPS)
            & (pu >= self.u_range[0])
            & (pu <= self.u_range[1])
            & (pv >= self.v_range[0])
            & (pv <= self.v_range[1])
        )
        return np.where(hit, t, np.inf)

    def shading(self, points: np.ndarray, dirs: np.ndarray):
        (ua, va), k = self._uv_axes()
        normals = np.zeros_like(points)
        normals[:, k] = self.normal_sign
        return normals, self.material.albedo_at(points[:, ua], points[:, va])

    def aabb(self):
        (ua, va), k = self._uv_axes()
        lo, hi = np.empty(3), np.empty(3)
        lo[k] = hi[k] = self.value
        lo[ua], hi[ua] = self.u_range
        lo[va], hi[va] = self.v_range
        return lo, hi

    def to_dict(self):
        return {
            "type": "rect",
            "name": self.name,
            "axis": self.axis,
            "value": self.value,
            "u_range": list(self.u_range),
            "v_range": list(self.v_range),
            "normal_sign": self.normal_sign,
            "material": self.material.to_dict(),
        }


@dataclass
class Mesh:
    """Small triangle mesh (flat-shaded, two-sided)."""

    name: str
    vertices: np.ndarray
    triangles: np.ndarray
    material: Material

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if len(self.triangles) > 1000:
            raise ValueError("meshes are limited to 1000 triangles")

    def _hit_data(self, origins: np.ndarray, dirs: np.ndarray):
        n = origins.shape[0]
        best_t = np.full(n, np.inf)
        best_tri = np.full(n, -1, dtype=np.int64)
        v = self.vertices
        for i, (a, b, c) in enumerate(self.triangles):
            e1 = v[b] - v[a]
            e2 = v[c] - v[a]
            pvec = np.cross(dirs, e2)
            det = pvec @ e1
            ok = np.abs(det) > _EPS
            inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            tvec = origins - v[a]
            bu = np.einsum("nk,nk->n", tvec, pvec) * inv_det
            qvec = np.cross(tvec, e1)
            bv = np.einsum("nk,nk->n", dirs, qvec) * inv_det
            t = (qvec @ e2) * inv_det
            ok &= (bu >= 0) & (bv >= 0) & (bu + bv <= 1) & (t > _EPS) & (t < best_t)
            best_t = np.where(ok, t, best_t)
            best_tri = np.where(ok, i, best_tri)
        return best_t, best_tri

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        return self._hit_data(origins, dirs)[0]

    def shading(self, points: np.ndarray, dirs: np.ndarray):
        # Recover the hit triangle by re-tracing a short segment from just
        # behind each point; cheap for the small meshes allowed here.
        back = points - dirs * 1e-4
        _, tri = self._hit_data(back, dirs)
        tri = np.where(tri < 0, 0, tri)
        v = self.vertices
        a, b, c = (self.triangles[tri, i] for i in range(3))
        n = np.cross(v[b] - v[a], v[c] - v[a])
        n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), _EPS)
        flip = np.sign(-np.einsum("nk,nk->n", dirs, n))
        normals = n * np.where(flip == 0, 1.0, flip)[:, None]
        return normals, self.material.albedo_at(points[:, 0], points[:, 1])

    def aabb(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_dict(self):
        return {
            "type": "mesh",
            "name": self.name,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "material": self.material.to_dict(),
        }


_SURFACE_TYPES = {"sphere": Sphere, "box": Box, "rect": Rect, "mesh": Mesh}


@dataclass
class SceneSpec:
    """Surfaces plus global lighting constants for the tracer."""

    name: str
    surfaces: list
    light_intensity: float = 1.0
    ambient: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.ambient <= 1.0:
            raise ValueError("ambient must lie in [0, 1]")
        if self.light_intensity < 0:
            raise ValueError("light_intensity must be non-negative")

    def surface_index(self, name: str) -> int:
        for i, s in enumerate(self.surfaces):
            if s.name == name:
                return i
        raise KeyError(f"no surface named {name!r}")

    def aabb(self):
        los, his = zip(*(s.aabb() for s in self.surfaces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def bounds(self, pad: float = 1.1):
        lo, hi = self.aabb()
        center = 0.5 * (lo + hi)
        radius = 0.5 * float(np.linalg.norm(hi - lo)) * pad
        return center, max(radius, 1e-6)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "light_intensity": self.light_intensity,
            "ambient": self.ambient,
            "surfaces": [s.to_dict() for s in self.surfaces],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        surfaces = []
        for entry in d["surfaces"]:
            entry = dict(entry)
            kind = entry.pop("type")
            if kind not in _SURFACE_TYPES:
                raise ValueError(f"unknown surface type {kind!r}")
            entry["material"] = Material.from_dict(entry["material"])
            if kind == "rect":
                entry["u_range"] = tuple(entry["u_range"])
                entry["v_range"] = tuple(entry["v_range"])
            surfaces.append(_SURFACE_TYPES[kind](**entry))
        return cls(
            name=d.get("name", "scene"),
            surfaces=surfaces,
            light_intensity=d.get("light_intensity", 1.0),
            ambient=d.get("ambient", 0.1),
        )


def load_scene_spec(path) -> SceneSpec:
    with open(path) as fh:
        return SceneSpec.from_dict(json.load(fh))


def save_scene_spec(spec: SceneSpec, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=1)
    return path


# ----------------------------------------------------------------------
# tracing


def _nearest_hit(spec: SceneSpec, origins: np.ndarray, dirs: np.ndarray):
    best_t = np.full(origins.shape[0], np.inf)
    best_idx = np.full(origins.shape[0], -1, dtype=np.int64)
    for i, surface in enumerate(spec.surfaces):
        t = surface.intersect(origins, dirs)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_idx = np.where(closer, i, best_idx)
    return best_t, best_idx


def occluded(spec: SceneSpec, points: np.ndarray, light_pos: np.ndarray) -> np.ndarray:
    """True where the segment from each point to the light hits any surface."""
    to_light = light_pos - points
    dist = np.linalg.norm(to_light, axis=1)
    l_dir = to_light / np.maximum(dist, _EPS)[:, None]
    start = points + l_dir * _SHADOW_BIAS
    blocked = np.zeros(points.shape[0], dtype=bool)
    limit = dist - 2.0 * _SHADOW_BIAS
    for surface in spec.surfaces:
        t = surface.intersect(start, l_dir)
        blocked |= t < limit
    return blocked


def trace_rays(spec: SceneSpec, origins: np.ndarray, dirs: np.ndarray, light_pos: np.ndarray):
    """Shade a batch of rays; returns (colors, aux dict with masks and depth)."""
    n = origins.shape[0]
    t_hit, idx = _nearest_hit(spec, origins, dirs)
    colors = np.zeros((n, 3))
    shadowed = np.zeros(n, dtype=bool)
    facing = np.zeros(n, dtype=bool)
    points = origins + np.where(np.isfinite(t_hit), t_hit, 0.0)[:, None] * dirs

    for i, surface in enumerate(spec.surfaces):
        sel = idx == i
        if not sel.any():
            continue
        p = points[sel]
        d = dirs[sel]
        normals, albedo = surface.shading(p, d)
        to_light = light_pos - p
        dist = np.linalg.norm(to_light, axis=1)
        l_dir = to_light / np.maximum(dist, _EPS)[:, None]
        cos = np.einsum("nk,nk->n", normals, l_dir)
        blocked = occluded(spec, p, light_pos)
        vis = (~blocked).astype(np.float64)

        shade = np.maximum(cos, 0.0)[:, None] * albedo
        mat = surface.material
        if mat.specular_strength > 0:
            view = -d
            h = l_dir + view
            h /= np.maximum(np.linalg.norm(h, axis=1, keepdims=True), _EPS)
            spec_term = np.maximum(np.einsum("nk,nk->n", normals, h), 0.0)
            spec_term = np.where(cos > 0, spec_term**mat.specular_exponent, 0.0)
            shade = shade + mat.specular_strength * spec_term[:, None]

        colors[sel] = spec.ambient + vis[:, None] * spec.light_intensity * shade
        shadowed[sel] = blocked
        facing[sel] = cos > 0

    colors = np.clip(colors, 0.0, 1.0)
    aux = {
        "hit_index": idx,
        "depth": np.where(np.isfinite(t_hit), t_hit, np.inf),
        "shadowed": shadowed & (idx >= 0),
        "lit": (~shadowed) & facing & (idx >= 0),
    }
    return colors, aux


def trace_frame(
    spec: SceneSpec,
    camera: PinholeCamera,
    pose: Pose6D,
    light_pos: np.ndarray,
    spp: int = 1,
    rng: np.random.Generator | None = None,
):
    """Trace one image; aux masks come from the pixel-center pass."""
    uv = pixel_centers(camera)
    origins, dirs = backproject(camera, pose, uv)
    colors, aux = trace_rays(spec, origins, dirs, np.asarray(light_pos, dtype=np.float64))
    if spp > 1:
        if rng is None:
            raise ValueError("spp > 1 requires an rng")
        acc = colors.copy()
        base = uv - 0.5
        for _ in range(spp - 1):
            jittered = base + rng.uniform(0.0, 1.0, size=uv.shape)
            o2, d2 = backproject(camera, pose, jittered)
            c2, _ = trace_rays(spec, o2, d2, np.asarray(light_pos, dtype=np.float64))
            acc += c2
        colors = acc / spp
    h, w = camera.height, camera.width
    image = colors.reshape(h, w, 3).astype(np.float32)
    aux = {k: v.reshape(h, w) for k, v in aux.items()}
    return image, aux


def synth_olat(
    spec: SceneSpec,
    camera_poses: list[Pose6D],
    light_poses: list[Pose6D],
    camera: PinholeCamera,
    spp: int = 1,
    seed: int = 0,
    name: str | None = None,
) -> OlatScene:
    """Trace the full (view, light) grid into an in-memory scene."""
    if not camera_poses or not light_poses:
        raise ValueError("need at least one camera and one light pose")
    rng = np.random.default_rng(seed)
    frames = {}
    min_depth, max_depth = np.inf, 0.0
    for n, cam_pose in enumerate(camera_poses):
        for m, light_pose in enumerate(light_poses):
            img, aux = trace_frame(
                spec, camera, cam_pose, light_pose.translation, spp=spp, rng=rng
            )
            frames[(n, m)] = img
            depths = aux["depth"][np.isfinite(aux["depth"])]
            if depths.size:
                min_depth = min(min_depth, float(depths.min()))
                max_depth = max(max_depth, float(depths.max()))
    if not np.isfinite(min_depth):
        min_depth, max_depth = 0.1, 6.0
    center, radius = spec.bounds()
    return OlatScene(
        name=name or spec.name,
        camera=camera,
        camera_poses=list(camera_poses),
        light_poses=list(light_poses),
        frames=frames,
        t_near=max(1e-3, 0.9 * min_depth),
        t_far=1.1 * max_depth,
        bounds_center=center,
        bounds_radius=radius,
    )


# ----------------------------------------------------------------------
# presets


def _ground_and_wall(extent: float = 2.2, wall_y: float = 1.2, wall_top: float = 2.2):
    ground = Rect(
        name="ground",
        axis="z",
        value=0.0,
        u_range=(-extent, extent),
        v_range=(-extent, extent),
        normal_sign=1.0,
        material=Material(
            checker_colors=[[0.78, 0.74, 0.68], [0.38, 0.40, 0.46]], checker_scale=1.5
        ),
    )
    wall = Rect(
        name="back_wall",
        axis="y",
        value=wall_y,
        u_range=(-extent, extent),
        v_range=(0.0, wall_top),
        normal_sign=-1.0,
        material=Material(
            checker_colors=[[0.70, 0.58, 0.45], [0.42, 0.30, 0.26]], checker_scale=2.0
        ),
    )
    return [ground, wall]


def _icosahedron(center, scale: float) -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts[0])
    tris = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return verts * scale + np.asarray(center), tris


def preset_scene(name: str) -> SceneSpec:
    """Built-in scene specs: ``sphere-shadow`` and ``icosa``."""
    if name == "sphere-shadow":
        sphere = Sphere(
            name="ball",
            center=[0.0, 0.0, 0.3],
            radius=0.3,
            material=Material(albedo=[0.82, 0.28, 0.22]),
        )
        return SceneSpec(
            name="sphere-shadow",
            surfaces=_ground_and_wall() + [sphere],
            light_intensity=1.0,
            ambient=0.12,
        )
    if name == "icosa":
        verts, tris = _icosahedron([0.0, 0.0, 0.32], 0.3)
        mesh = Mesh(
            name="icosa",
            vertices=verts,
            triangles=tris,
            material=Material(albedo=[0.25, 0.55, 0.8], specular_strength=0.2,
                              specular_exponent=48.0),
        )
        return SceneSpec(
            name="icosa",
            surfaces=_ground_and_wall() + [mesh],
            light_intensity=1.0,
            ambient=0.12,
        )
    raise ValueError(f"unknown preset {name!r}; expected sphere-shadow or icosa")


PRESET_NAMES = ("sphere-shadow", "icosa")
