"""Relightable neural radiance fields for one-light-at-a-time (OLAT) captures.

The package trains lightweight radiance-field models whose color stage is
conditioned on the position of a single point light, so that a scene captured
under varying light placements can be re-rendered from novel viewpoints under
novel lights.  It ships a synthetic OLAT ray-tracing oracle, dataset split and
trajectory tooling, CPU training with exact analytic gradients, image-quality
metrics, and a command-line interface.
"""

__version__ = "0.1.0"

from .estimator import RelightingNerf
from .geometry import PinholeCamera, Pose6D, Ray
from .models import RelightModel, Variant, build_variant
from .scene import OlatScene, load_scene, save_scene
from .splits import SplitAssignment, generate_splits
from .training import TrainConfig, train

__all__ = [
    "OlatScene",
    "PinholeCamera",
    "Pose6D",
    "Ray",
    "RelightModel",
    "RelightingNerf",
    "SplitAssignment",
    "TrainConfig",
    "Variant",
    "build_variant",
    "generate_splits",
    "load_scene",
    "save_scene",
    "train",
]
