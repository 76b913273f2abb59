"""Scikit-learn style estimator facade over scene training.

``RelightingNerf`` follows the estimator protocol: hyperparameters are
constructor arguments stored verbatim (so ``get_params``/``set_params`` and
``clone`` work), ``fit`` learns from an OLAT scene, and learned state lives
in trailing-underscore attributes.  ``predict`` renders (view, light) index
pairs of the fitted scene and ``score`` returns mean PSNR against the
scene's ground-truth frames, so the estimator composes with model-selection
tooling that expects "higher is better" scores.

Defaults are sized for CPU desk-scale scenes; full-scale values can be set
explicitly (e.g. ``n_coarse=128, n_fine=128, rays_per_batch=4096``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .encodings import HashGridParams, geometric_scale
from .geometry import Pose6D
from .models import RelightModel, SceneBounds, Variant, render_frame
from .metrics import psnr
from .scene import OlatScene
from .splits import SplitAssignment, generate_splits
from .training import TrainConfig, train


class RelightingNerf(BaseEstimator):
    """Light-conditioned radiance field with a fit/predict interface."""

    def __init__(
        self,
        variant: str = "v5",
        hash_levels: int = 8,
        hash_features: int = 2,
        hash_table_size: int = 2**15,
        hash_base_resolution: int = 16,
        hash_max_resolution: int = 256,
        embed_width: int = 15,
        hidden_width: int = 64,
        rays_per_batch: int = 2048,
        lr: float = 0.01,
        n_coarse: int = 16,
        n_fine: int = 16,
        max_epochs: int = 5,
        patience: int = 10,
        jitter: bool = True,
        seed: int = 0,
    ):
        self.variant = variant
        self.hash_levels = hash_levels
        self.hash_features = hash_features
        self.hash_table_size = hash_table_size
        self.hash_base_resolution = hash_base_resolution
        self.hash_max_resolution = hash_max_resolution
        self.embed_width = embed_width
        self.hidden_width = hidden_width
        self.rays_per_batch = rays_per_batch
        self.lr = lr
        self.n_coarse = n_coarse
        self.n_fine = n_fine
        self.max_epochs = max_epochs
        self.patience = patience
        self.jitter = jitter
        self.seed = seed

    # ------------------------------------------------------------------

    def _hash_params(self) -> HashGridParams:
        return HashGridParams(
            levels=self.hash_levels,
            features_per_level=self.hash_features,
            table_size=self.hash_table_size,
            base_resolution=self.hash_base_resolution,
            per_level_scale=geometric_scale(
                self.hash_base_resolution, self.hash_max_resolution, self.hash_levels
            ),
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            rays_per_batch=self.rays_per_batch,
            lr=self.lr,
            n_coarse=self.n_coarse,
            n_fine=self.n_fine,
            patience=self.patience,
            max_epochs=self.max_epochs,
            jitter=self.jitter,
            seed=self.seed,
        )

    def fit(self, scene: OlatScene, split: SplitAssignment | None = None):
        """Train on a scene; generates a seeded split when none is given."""
        if not isinstance(scene, OlatScene):
            raise TypeError("scene must be an OlatScene")
        scene.validate()
        if split is None:
            split = generate_splits(
                scene.n_views,
                scene.n_lights,
                seed=self.seed,
                n_val_views=1,
                n_test_views=1,
                n_test_lights=1,
                val_lights_per_view=min(3, scene.n_lights - 1),
            )
        rng = np.random.default_rng(self.seed)
        model = RelightModel(
            Variant.parse(self.variant),
            self._hash_params(),
            SceneBounds(scene.bounds_center, scene.bounds_radius),
            embed_width=self.embed_width,
            hidden_width=self.hidden_width,
            rng=rng,
        )
        result = train(model, scene, split, self._train_config())
        self.model_ = result.model
        self.scene_ = scene
        self.split_ = split
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_val_psnr_ = result.best_val_psnr
        self.n_steps_ = result.steps
        self.diverged_ = result.diverged
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this RelightingNerf instance is not fitted yet")

    @staticmethod
    def _as_index_pairs(X) -> np.ndarray:
        pairs = np.asarray(X)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("X must be an (n_frames, 2) array of (view, light) indices")
        return pairs.astype(int)

    def predict(self, X) -> np.ndarray:
        """Render (view, light) index pairs into an (n, H, W, 3) array."""
        self._check_fitted()
        pairs = self._as_index_pairs(X)
        scene = self.scene_
        out = []
        for n, m in pairs:
            if not (0 <= n < scene.n_views and 0 <= m < scene.n_lights):
                raise ValueError(f"frame index ({n}, {m}) out of range")
            out.append(
                render_frame(
                    self.model_,
                    scene.camera,
                    scene.camera_poses[n],
                    scene.light_poses[m],
                    scene.t_near,
                    scene.t_far,
                    n_coarse=self.n_coarse,
                    n_fine=self.n_fine,
                )
            )
        return np.stack(out)

    def render(self, camera_pose: Pose6D, light_pose: Pose6D | None = None) -> np.ndarray:
        """Render an arbitrary camera/light pose pair (novel trajectory use)."""
        self._check_fitted()
        return render_frame(
            self.model_,
            self.scene_.camera,
            camera_pose,
            light_pose,
            self.scene_.t_near,
            self.scene_.t_far,
            n_coarse=self.n_coarse,
            n_fine=self.n_fine,
        )

    def score(self, X, y=None) -> float:
        """Mean PSNR (dB, capped at 100) of renders against ground truth.

        ``y`` may supply target images; otherwise they are looked up in the
        fitted scene's frames.
        """
        self._check_fitted()
        pairs = self._as_index_pairs(X)
        preds = self.predict(pairs)
        values = []
        for i, (n, m) in enumerate(pairs):
            if y is not None:
                target = np.asarray(y[i])
            else:
                key = (int(n), int(m))
                if key not in self.scene_.frames:
                    raise ValueError(f"scene has no ground-truth frame {key}")
                target = self.scene_.frames[key]
            values.append(min(psnr(preds[i], target), 100.0))
        return float(np.mean(values))
