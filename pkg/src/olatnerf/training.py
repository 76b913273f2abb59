"""Ray-batch training with early stopping on validation PSNR.

Each step samples a random batch of training rays, renders them with the
two-pass sampler, and minimizes the mean squared error between composited
and ground-truth pixels (averaged over rays and channels).  Validation
frames are rendered once per epoch (an epoch is one full pass over the
training rays); the best-validation parameters are kept and restored at the
end.  A NaN loss aborts training with the last finite state intact -- the
optimizer skips non-finite gradients, so parameters never go bad.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import backproject, pixel_centers
from .metrics import psnr
from .models import RelightModel, Variant, render_frame
from .nets import adam_step, init_adam
from .rendering import RaySampleBatch, composite, composite_backward, sample_ray_points
from .scene import OlatScene
from .splits import SplitAssignment

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Optimization hyperparameters; defaults match full-scale training."""

    rays_per_batch: int = 4096
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n_coarse: int = 128
    n_fine: int = 128
    patience: int = 10
    min_improvement_db: float = 0.01
    max_epochs: int = 50
    max_steps: int | None = None
    jitter: bool = True
    seed: int = 0

    def __post_init__(self):
        if min(self.rays_per_batch, self.n_coarse, self.patience, self.max_epochs) < 1:
            raise ValueError("counts and patience must be >= 1")
        if self.n_fine < 0:
            raise ValueError("n_fine must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


# Reduced profile sized for CPU-only desk experiments.
DESK_TRAIN_CONFIG = TrainConfig(
    rays_per_batch=2048,
    n_coarse=16,
    n_fine=16,
    max_epochs=5,
    patience=10,
)


@dataclass
class RayDataset:
    """Flattened per-ray training data for a set of frames."""

    origins: np.ndarray
    dirs: np.ndarray
    gt: np.ndarray
    light_positions: np.ndarray
    light_indices: np.ndarray

    def __len__(self) -> int:
        return self.origins.shape[0]


def build_ray_dataset(scene: OlatScene, frame_keys) -> RayDataset:
    """Precompute origins/directions/targets for every pixel of the frames."""
    uv = pixel_centers(scene.camera)
    dirs_by_view: dict[int, np.ndarray] = {}
    origins_parts, dirs_parts, gt_parts, lights_parts, light_idx_parts = [], [], [], [], []
    for n, m in frame_keys:
        if (n, m) not in scene.frames:
            raise ValueError(f"frame ({n}, {m}) not present in scene")
        if n not in dirs_by_view:
            _, d = backproject(scene.camera, scene.camera_poses[n], uv)
            dirs_by_view[n] = d.astype(np.float32)
        d = dirs_by_view[n]
        origins_parts.append(
            np.broadcast_to(
                scene.camera_poses[n].translation.astype(np.float32), d.shape
            )
        )
        dirs_parts.append(d)
        gt_parts.append(scene.frames[(n, m)].reshape(-1, 3))
        lights_parts.append(
            np.broadcast_to(
                scene.light_poses[m].translation.astype(np.float32), d.shape
            )
        )
        light_idx_parts.append(np.full(d.shape[0], m, dtype=np.int32))
    return RayDataset(
        origins=np.concatenate(origins_parts),
        dirs=np.concatenate(dirs_parts),
        gt=np.concatenate(gt_parts),
        light_positions=np.concatenate(lights_parts),
        light_indices=np.concatenate(light_idx_parts),
    )


@dataclass
class TrainResult:
    model: RelightModel
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_psnr: float = -math.inf
    steps: int = 0
    diverged: bool = False
    optimizer_step: int = 0
    optimizer_state: tuple | None = None


def _val_psnr(model, scene, val_keys, config) -> float:
    values = []
    for n, m in val_keys:
        img = render_frame(
            model,
            scene.camera,
            scene.camera_poses[n],
            scene.light_poses[m],
            scene.t_near,
            scene.t_far,
            n_coarse=config.n_coarse,
            n_fine=config.n_fine,
        )
        values.append(min(psnr(img, scene.frames[(n, m)]), 100.0))
    return float(np.mean(values))


def train(
    model: RelightModel,
    scene: OlatScene,
    split: SplitAssignment,
    config: TrainConfig,
    progress=None,
) -> TrainResult:
    """Optimize ``model`` in place; returns history and best-val parameters.

    ``progress`` is an optional callable receiving one dict per epoch.
    """
    train_keys = [k for k in split.train if k in scene.frames]
    val_keys = [k for k in split.val if k in scene.frames]
    if not train_keys or not val_keys:
        raise ValueError("split must provide at least one train and one val frame")

    data = build_ray_dataset(scene, train_keys)
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    adam = init_adam(params, lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                     eps=config.adam_eps)

    light_codes = None
    if model.variant.uses_absolute_light:
        light_codes = np.stack([model.light_code(p) for p in scene.light_poses])

    result = TrainResult(model=model)
    best_snapshot = None

    def snapshot():
        return (
            [p.copy() for p in params],
            [m.copy() for m in adam.m],
            [v.copy() for v in adam.v],
            adam.step,
        )

    baseline = _val_psnr(model, scene, val_keys, config)
    result.best_val_psnr = baseline
    result.best_epoch = 0
    best_snapshot = snapshot()
    result.history.append(
        {"epoch": 0, "mean_loss": None, "train_psnr": None, "val_psnr": baseline,
         "seconds": 0.0}
    )
    if progress:
        progress(result.history[-1])

    n_rays = len(data)
    since_best = 0
    stop = False
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n_rays)
        losses = []
        for start in range(0, n_rays, config.rays_per_batch):
            idx = order[start : start + config.rays_per_batch]
            loss = _train_step(model, data, idx, scene, config, params, adam, rng,
                               light_codes)
            result.steps += 1
            if not math.isfinite(loss):
                logger.warning("training diverged at step %d; aborting", result.steps)
                result.diverged = True
                stop = True
                break
            losses.append(loss)
            if config.max_steps is not None and result.steps >= config.max_steps:
                stop = True
                break

        mean_loss = float(np.mean(losses)) if losses else math.nan
        train_psnr = 10.0 * math.log10(1.0 / mean_loss) if mean_loss > 0 else 100.0
        val = _val_psnr(model, scene, val_keys, config)
        entry = {
            "epoch": epoch,
            "mean_loss": mean_loss,
            "train_psnr": train_psnr,
            "val_psnr": val,
            "seconds": time.perf_counter() - t0,
        }
        result.history.append(entry)
        if progress:
            progress(entry)

        if val > result.best_val_psnr + config.min_improvement_db and not result.diverged:
            result.best_val_psnr = val
            result.best_epoch = epoch
            best_snapshot = snapshot()
            since_best = 0
        else:
            since_best += 1
        if stop or since_best >= config.patience:
            break

    best_params, best_m, best_v, best_step = best_snapshot
    model.set_parameters(best_params)
    result.optimizer_step = best_step
    result.optimizer_state = (best_m, best_v)
    return result


def _train_step(model, data, idx, scene, config, params, adam, rng, light_codes):
    origins = data.origins[idx].astype(np.float64)
    dirs = data.dirs[idx].astype(np.float64)
    gt = data.gt[idx]
    light_pos = data.light_positions[idx]
    codes = light_codes[data.light_indices[idx]] if light_codes is not None else None

    t, delta, positions = sample_ray_points(
        model.density, origins, dirs, scene.t_near, scene.t_far,
        config.n_coarse, config.n_fine, config.jitter, rng,
    )
    sigma, color, vis, cache = model.forward_samples(
        positions, dirs, light_pos, codes, want_cache=True
    )
    batch = RaySampleBatch(
        t=t.astype(model.dtype),
        delta=delta.astype(model.dtype),
        sigma=sigma,
        color=color,
        visibility=vis,
    )
    comp = composite(batch)
    diff = comp.rgb - gt
    valid = comp.valid
    n_valid = int(valid.sum())
    if n_valid == 0:
        return math.nan
    diff = np.where(valid[:, None], diff, 0.0)
    loss = float(np.sum(diff * diff) / (3.0 * n_valid))

    grad_rgb = (2.0 / (3.0 * n_valid)) * diff
    d_sigma, d_color, d_vis = composite_backward(batch, grad_rgb.astype(model.dtype))
    grads = model.backward_samples(cache, d_sigma, d_color, d_vis)
    adam_step(params, grads, adam)
    return loss
