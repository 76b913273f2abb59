"""Equal-area waypoint generation on spherical regions.

Camera and light positions are placed at the centers of equal-solid-angle
cells of a spherical band segment.  The partition is built from latitude
rings: cells are apportioned to rings proportionally to ring area, ring
boundaries are then adjusted so each ring's area is exactly its cell count
times the target cell area, and every ring is split uniformly in azimuth.
All cells therefore have identical solid angle up to float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose6D, look_at


@dataclass(frozen=True)
class SphericalRegion:
    """Band segment {theta in [theta_min, theta_max], phi in [phi_min, phi_max]}.

    ``theta`` is the colatitude measured from +z; ``phi`` the azimuth.
    """

    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float

    def __post_init__(self):
        if not (0.0 <= self.theta_min < self.theta_max <= math.pi):
            raise ValueError("require 0 <= theta_min < theta_max <= pi")
        if not (0.0 < self.phi_max - self.phi_min <= 2.0 * math.pi + 1e-12):
            raise ValueError("require 0 < phi_max - phi_min <= 2*pi")

    @property
    def phi_span(self) -> float:
        return self.phi_max - self.phi_min

    def solid_angle(self) -> float:
        return self.phi_span * (math.cos(self.theta_min) - math.cos(self.theta_max))


# Defaults mirroring an upper light dome and a side camera wedge that do not
# intersect (disjoint colatitude bands).
DOME = SphericalRegion(0.0, math.radians(50.0), -math.pi, math.pi)
WEDGE = SphericalRegion(
    math.radians(55.0), math.radians(90.0), math.radians(-150.0), math.radians(-30.0)
)


def _apportion(quotas: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of non-negative quotas summing to ``total``."""
    base = np.floor(quotas).astype(int)
    remainder = total - int(base.sum())
    if remainder > 0:
        order = np.argsort(-(quotas - base), kind="stable")
        base[order[:remainder]] += 1
    return base


def equal_area_cells(region: SphericalRegion, count: int) -> np.ndarray:
    """Cell bounds (count, 4) as rows (cos_lo, cos_hi, phi_lo, phi_hi).

    ``cos_lo > cos_hi`` (colatitude increases downward); each cell's solid
    angle ``(phi_hi - phi_lo) * (cos_lo - cos_hi)`` equals the region's area
    divided by ``count``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    area = region.solid_angle()
    if area <= 0:
        raise ValueError("region has zero solid angle")
    cell_area = area / count

    # Square-ish ring count from the region's angular aspect ratio.
    theta_mid = 0.5 * (region.theta_min + region.theta_max)
    width = region.phi_span * max(math.sin(theta_mid), 1e-6)
    height = region.theta_max - region.theta_min
    n_rings = int(np.clip(round(math.sqrt(count * height / width)), 1, count))

    theta_edges = np.linspace(region.theta_min, region.theta_max, n_rings + 1)
    ring_areas = region.phi_span * -np.diff(np.cos(theta_edges))
    cells_per_ring = _apportion(count * ring_areas / area, count)
    cells_per_ring = cells_per_ring[cells_per_ring > 0]

    cells = np.empty((count, 4))
    cos_hi_edge = math.cos(region.theta_min)
    row = 0
    for k in cells_per_ring:
        cos_lo_edge = cos_hi_edge - k * cell_area / region.phi_span
        phi_edges = np.linspace(region.phi_min, region.phi_max, k + 1)
        for j in range(k):
            cells[row] = (cos_hi_edge, cos_lo_edge, phi_edges[j], phi_edges[j + 1])
            row += 1
        cos_hi_edge = cos_lo_edge
    return cells


def equal_area_waypoints(
    region: SphericalRegion,
    count: int,
    radius: float,
    target=(0.0, 0.0, 0.0),
    up=(0.0, 0.0, 1.0),
) -> list[Pose6D]:
    """Look-at poses at the area centroids of an equal-area partition."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    target = np.asarray(target, dtype=np.float64)
    cells = equal_area_cells(region, count)
    poses = []
    for cos_lo, cos_hi, phi_lo, phi_hi in cells:
        cos_c = 0.5 * (cos_lo + cos_hi)
        phi_c = 0.5 * (phi_lo + phi_hi)
        sin_c = math.sqrt(max(0.0, 1.0 - cos_c * cos_c))
        offset = np.array(
            [sin_c * math.cos(phi_c), sin_c * math.sin(phi_c), cos_c]
        )
        poses.append(look_at(target + radius * offset, target, up))
    return poses
