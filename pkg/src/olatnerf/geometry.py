"""Rigid poses, pinhole cameras, and ray generation.

Conventions used throughout the package:

* Poses are camera/light-to-world rigid transforms ``x_world = R @ x_local + t``.
* The camera looks down +z in its own frame; x points right and y points down,
  matching pixel coordinates measured from the image's top-left corner.
* Pixel locations are continuous ``(u, v)`` values.  Integer pixel ``(i, j)``
  is sampled at its center ``(i + 0.5, j + 0.5)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import as_float_array

_ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Pose6D:
    """Rigid transform with a 3x3 rotation and a 3-vector translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = as_float_array(self.rotation, "rotation", (3, 3), np.float64)
        tr = as_float_array(self.translation, "translation", (3,), np.float64)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=_ROTATION_TOL):
            raise ValueError("rotation must be orthonormal")
        if not np.isclose(np.linalg.det(rot), 1.0, atol=_ROTATION_TOL):
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @staticmethod
    def identity() -> "Pose6D":
        return Pose6D(np.eye(3), np.zeros(3))

    def to_matrix(self) -> np.ndarray:
        """4x4 row-major homogeneous matrix with bottom row (0, 0, 0, 1)."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m) -> "Pose6D":
        m = as_float_array(m, "pose matrix", (4, 4), np.float64)
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=_ROTATION_TOL):
            raise ValueError("pose matrix must have bottom row (0, 0, 0, 1)")
        return Pose6D(m[:3, :3], m[:3, 3])


def compose(a: Pose6D, b: Pose6D) -> Pose6D:
    """Transform that applies ``b`` first, then ``a``."""
    return Pose6D(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(p: Pose6D) -> Pose6D:
    rot_inv = p.rotation.T
    return Pose6D(rot_inv, -rot_inv @ p.translation)


def transform_point(pose: Pose6D, x) -> np.ndarray:
    """Apply ``R @ x + t`` to a single point or an (N, 3) stack of points."""
    x = np.asarray(x, dtype=np.float64)
    return x @ pose.rotation.T + pose.translation


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose6D:
    """Pose positioned at ``eye`` with +z pointing at ``target``.

    The camera's y axis (image "down") is aligned against the world ``up``
    projection; a fallback up-vector is substituted when the view direction
    is parallel to ``up``.
    """
    eye = as_float_array(eye, "eye", (3,), np.float64)
    target = as_float_array(target, "target", (3,), np.float64)
    up = as_float_array(up, "up", (3,), np.float64)
    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("eye and target coincide")
    forward = forward / norm
    if abs(forward @ up) > 1.0 - 1e-9 or np.linalg.norm(up) < 1e-12:
        up = np.array([0.0, 1.0, 0.0])
        if abs(forward @ up) > 1.0 - 1e-9:
            up = np.array([1.0, 0.0, 0.0])
    down = forward * (forward @ up) - up
    down = down / np.linalg.norm(down)
    right = np.cross(down, forward)
    rot = np.stack([right, down, forward], axis=1)
    return Pose6D(rot, eye)


@dataclass(frozen=True)
class PinholeCamera:
    """Intrinsics: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")


@dataclass(frozen=True)
class Ray:
    """Half-open ray segment with a unit direction."""

    origin: np.ndarray
    direction: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        origin = as_float_array(self.origin, "origin", (3,))
        direction = as_float_array(self.direction, "direction", (3,))
        if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit-length")
        if not 0 <= self.t_near < self.t_far:
            raise ValueError("require 0 <= t_near < t_far")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)


def backproject(camera: PinholeCamera, pose: Pose6D, uv) -> tuple[np.ndarray, np.ndarray]:
    """World-space origins and unit directions for continuous pixel positions.

    ``uv`` is an (N, 2) array of pixel coordinates.  All rays share the camera
    center ``pose.translation`` as origin; the returned origins array is
    broadcast to (N, 3) for convenience.
    """
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    if uv.ndim != 2 or uv.shape[1] != 2:
        raise ValueError(f"pixels must be (N, 2), got {uv.shape}")
    u, v = uv[:, 0], uv[:, 1]
    if np.any(u < 0) or np.any(u >= camera.width) or np.any(v < 0) or np.any(v >= camera.height):
        raise ValueError("pixel coordinates out of image bounds")
    dirs_cam = np.stack(
        [(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, np.ones_like(u)], axis=1
    )
    dirs_world = dirs_cam @ pose.rotation.T
    dirs_world /= np.linalg.norm(dirs_world, axis=1, keepdims=True)
    origins = np.broadcast_to(pose.translation, dirs_world.shape)
    return origins, dirs_world


def camera_rays(
    camera: PinholeCamera,
    pose: Pose6D,
    pixels,
    t_near: float = 0.1,
    t_far: float = 6.0,
) -> list[Ray]:
    """One ray per (u, v) pixel position, in the order given."""
    origins, dirs = backproject(camera, pose, pixels)
    return [Ray(o, d, t_near, t_far) for o, d in zip(origins, dirs)]


def pixel_centers(camera: PinholeCamera) -> np.ndarray:
    """Half-integer centers of every pixel, row-major, as an (H*W, 2) array."""
    u = np.arange(camera.width, dtype=np.float64) + 0.5
    v = np.arange(camera.height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu.ravel(), vv.ravel()], axis=1)


def relative_light_dir(light_t, x) -> np.ndarray:
    """Unit vector pointing from ``x`` toward the light position ``light_t``."""
    light_t = as_float_array(light_t, "light_t", (3,))
    x = as_float_array(x, "x", (3,))
    diff = light_t - x
    norm = np.linalg.norm(diff)
    if norm < 1e-12:
        raise ValueError("light position coincides with the query point")
    return diff / norm
