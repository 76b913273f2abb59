"""The relightable radiance-field model family.

A model is three small networks around a trainable hash grid:

* a geometry network mapping hash features of a position to a density and a
  feature embedding,
* a color network whose inputs are wired differently per variant,
* an optional visibility network predicting a scalar point-to-light
  visibility that multiplies the color before compositing.

The six variants form a ladder of light-conditioning strategies:

========  ==============================================================
variant   color-network input wiring
========  ==============================================================
v0        embedding, sh(view)                      (light-blind)
v1        embedding, sh(view), fourier(light pose R,t flattened)
v2        embedding, sh(view), sh(light direction)
v3        v2 plus the position's hash features as a skip input
v4        sh(view), sh(light direction), hash features; embedding
          concatenated after the first hidden layer
v5        v4 plus the visibility network on (hash features, sh(light))
========  ==============================================================
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .encodings import (
    FOURIER_OUTPUT_DIM,
    SH_DIM,
    HashGrid,
    HashGridParams,
    fourier_encode,
    sh_encode,
)
from .geometry import Pose6D
from .nets import MlpSpec, init_mlp, mlp_backward, mlp_forward, trunc_exp, trunc_exp_grad


class Variant(str, Enum):
    V0 = "v0"
    V1 = "v1"
    V2 = "v2"
    V3 = "v3"
    V4 = "v4"
    V5 = "v5"

    @classmethod
    def parse(cls, tag) -> "Variant":
        if isinstance(tag, Variant):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown variant {tag!r}; expected v0..v5") from None

    @property
    def rank(self) -> int:
        return int(self.value[1])

    @property
    def uses_absolute_light(self) -> bool:
        return self is Variant.V1

    @property
    def uses_relative_light(self) -> bool:
        return self.rank >= 2

    @property
    def skip_position_into_rgb(self) -> bool:
        return self.rank >= 3

    @property
    def delayed_embedding_injection(self) -> bool:
        return self.rank >= 4

    @property
    def has_visibility_net(self) -> bool:
        return self is Variant.V5

    def flags(self) -> dict:
        return {
            "absolute_light": self.uses_absolute_light,
            "relative_light": self.uses_relative_light,
            "position_skip": self.skip_position_into_rgb,
            "delayed_embedding": self.delayed_embedding_injection,
            "visibility_net": self.has_visibility_net,
        }


@dataclass
class SceneBounds:
    """Axis-aligned cube used to map world points into the hash grid's unit cube."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.center.shape != (3,):
            raise ValueError("bounds center must be a 3-vector")
        if not self.radius > 0:
            raise ValueError("bounds radius must be positive")

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (x - (self.center - self.radius)) / (2.0 * self.radius)


def _rgb_input_layout(variant: Variant, embed_width: int, hash_dim: int):
    """Ordered (name, width) blocks forming the color network's input."""
    layout = []
    if not variant.delayed_embedding_injection:
        layout.append(("embedding", embed_width))
    layout.append(("sh_view", SH_DIM))
    if variant.uses_absolute_light:
        layout.append(("fourier_light", FOURIER_OUTPUT_DIM))
    if variant.uses_relative_light:
        layout.append(("sh_light", SH_DIM))
    if variant.skip_position_into_rgb:
        layout.append(("hash", hash_dim))
    return layout


class RelightModel:
    """A variant-wired radiance field with explicit forward/backward passes."""

    def __init__(
        self,
        variant: Variant,
        hash_params: HashGridParams,
        bounds: SceneBounds,
        embed_width: int = 15,
        hidden_width: int = 64,
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ):
        self.variant = Variant.parse(variant)
        self.bounds = bounds
        self.embed_width = embed_width
        self.hidden_width = hidden_width
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng()

        self.hash_grid = HashGrid(hash_params, rng=rng, dtype=self.dtype)
        hash_dim = hash_params.output_dim

        self.geo_spec = MlpSpec(hash_dim, (hidden_width,) * 2, 1 + embed_width, "none")
        self.rgb_layout = _rgb_input_layout(self.variant, embed_width, hash_dim)
        rgb_in = sum(width for _, width in self.rgb_layout)
        if self.variant.delayed_embedding_injection:
            self.rgb_spec = MlpSpec(
                rgb_in, (hidden_width,) * 4, 3, "sigmoid",
                inject_after=1, inject_width=embed_width,
            )
        else:
            self.rgb_spec = MlpSpec(rgb_in, (hidden_width,) * 4, 3, "sigmoid")
        self.vis_spec = None
        if self.variant.has_visibility_net:
            self.vis_spec = MlpSpec(hash_dim + SH_DIM, (hidden_width,) * 4, 1, "sigmoid")

        self.geo_params = init_mlp(self.geo_spec, rng, self.dtype)
        self.rgb_params = init_mlp(self.rgb_spec, rng, self.dtype)
        self.vis_params = init_mlp(self.vis_spec, rng, self.dtype) if self.vis_spec else None

    # ------------------------------------------------------------------
    # parameter plumbing

    def parameters(self) -> list[np.ndarray]:
        """Flat, ordered list of every trainable array (shared, not copied)."""
        out = [self.hash_grid.table]
        for params in self._mlp_param_groups():
            for w, b in params:
                out.extend((w, b))
        return out

    def parameter_names(self) -> list[str]:
        names = ["hash_table"]
        groups = ["geo", "rgb"] + (["vis"] if self.vis_params else [])
        for gname, params in zip(groups, self._mlp_param_groups()):
            for i in range(len(params)):
                names.extend((f"{gname}.w{i}", f"{gname}.b{i}"))
        return names

    def _mlp_param_groups(self):
        groups = [self.geo_params, self.rgb_params]
        if self.vis_params is not None:
            groups.append(self.vis_params)
        return groups

    def set_parameters(self, arrays: list[np.ndarray]) -> None:
        current = self.parameters()
        if len(arrays) != len(current):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(current, arrays):
            if dst.shape != src.shape:
                raise ValueError("parameter shape mismatch")
            dst[...] = src

    def copy(self) -> "RelightModel":
        return copy.deepcopy(self)

    # ------------------------------------------------------------------
    # conditioning helpers

    def light_code(self, light_pose: Pose6D) -> np.ndarray:
        """Fourier code of a light pose (rotation plus normalized translation)."""
        t_norm = (light_pose.translation - self.bounds.center) / self.bounds.radius
        flat = np.concatenate([light_pose.rotation.ravel(), t_norm])
        return fourier_encode(flat).astype(self.dtype)

    # ------------------------------------------------------------------
    # forward / backward

    def density(self, x_flat: np.ndarray) -> np.ndarray:
        """Densities only, used for the coarse sampling pass (no gradients)."""
        x01 = self.bounds.to_unit(np.asarray(x_flat, dtype=np.float64)).astype(self.dtype)
        hx = self.hash_grid.forward(x01)
        geo_out, _ = mlp_forward(self.geo_spec, self.geo_params, hx)
        return trunc_exp(geo_out[:, 0])

    def forward_samples(
        self,
        positions: np.ndarray,
        dirs: np.ndarray,
        light_positions: np.ndarray | None = None,
        light_codes: np.ndarray | None = None,
        want_cache: bool = False,
    ):
        """Evaluate density/color (and visibility) on (n_rays, n_samples, 3) points.

        ``dirs`` is (n_rays, 3) unit view directions; ``light_positions`` is
        (n_rays, 3) point-light locations (required for v2+); ``light_codes``
        is (n_rays, fourier_dim) precomputed light-pose codes (required for v1).
        """
        variant = self.variant
        n_rays, n_samples, _ = positions.shape
        n = n_rays * n_samples
        x_flat = positions.reshape(n, 3)
        x01 = self.bounds.to_unit(np.asarray(x_flat, dtype=np.float64)).astype(self.dtype)

        hx, hash_cache = self.hash_grid.forward(x01, with_cache=True)
        geo_out, geo_cache = mlp_forward(self.geo_spec, self.geo_params, hx)
        sigma_z = geo_out[:, 0]
        sigma = trunc_exp(sigma_z)
        embedding = geo_out[:, 1:]

        sh_view = sh_encode(np.asarray(dirs, dtype=self.dtype))
        sh_view_s = np.repeat(sh_view, n_samples, axis=0)

        blocks = {"embedding": embedding, "sh_view": sh_view_s, "hash": hx}
        if variant.uses_absolute_light:
            if light_codes is None:
                raise ValueError(f"variant {variant.value} requires light_codes")
            blocks["fourier_light"] = np.repeat(
                np.asarray(light_codes, dtype=self.dtype), n_samples, axis=0
            )
        if variant.uses_relative_light or variant.has_visibility_net:
            if light_positions is None:
                raise ValueError(f"variant {variant.value} requires light_positions")
            to_light = np.repeat(
                np.asarray(light_positions, dtype=np.float64), n_samples, axis=0
            ) - x_flat.astype(np.float64)
            norms = np.linalg.norm(to_light, axis=1, keepdims=True)
            to_light = to_light / np.maximum(norms, 1e-12)
            blocks["sh_light"] = sh_encode(to_light).astype(self.dtype)

        rgb_in = np.concatenate([blocks[name] for name, _ in self.rgb_layout], axis=1)
        extra = embedding if variant.delayed_embedding_injection else None
        color, rgb_cache = mlp_forward(self.rgb_spec, self.rgb_params, rgb_in, extra=extra)

        vis = None
        vis_cache = None
        if variant.has_visibility_net:
            vis_in = np.concatenate([hx, blocks["sh_light"]], axis=1)
            vis_out, vis_cache = mlp_forward(self.vis_spec, self.vis_params, vis_in)
            vis = vis_out[:, 0].reshape(n_rays, n_samples)

        out = (
            sigma.reshape(n_rays, n_samples),
            color.reshape(n_rays, n_samples, 3),
            vis,
        )
        if not want_cache:
            return out
        cache = {
            "hash": hash_cache,
            "geo": geo_cache,
            "rgb": rgb_cache,
            "vis": vis_cache,
            "sigma_z": sigma_z,
            "sigma": sigma,
            "shape": (n_rays, n_samples),
        }
        return out + (cache,)

    def backward_samples(self, cache, d_sigma, d_color, d_vis=None) -> list[np.ndarray]:
        """Gradients for every array in :meth:`parameters`, same order."""
        n_rays, n_samples = cache["shape"]
        n = n_rays * n_samples
        hash_dim = self.hash_grid.output_dim

        d_color_flat = np.ascontiguousarray(d_color.reshape(n, 3), dtype=self.dtype)
        rgb_grads, d_rgb_in, d_extra = mlp_backward(self.rgb_params, cache["rgb"], d_color_flat)

        d_hx = np.zeros((n, hash_dim), dtype=self.dtype)
        d_embedding = None
        offset = 0
        for name, width in self.rgb_layout:
            part = d_rgb_in[:, offset : offset + width]
            if name == "embedding":
                d_embedding = part
            elif name == "hash":
                d_hx += part
            offset += width
        if self.variant.delayed_embedding_injection:
            d_embedding = d_extra

        vis_grads = []
        if self.variant.has_visibility_net:
            d_vis_flat = np.ascontiguousarray(
                d_vis.reshape(n, 1), dtype=self.dtype
            )
            vis_grads, d_vis_in, _ = mlp_backward(self.vis_params, cache["vis"], d_vis_flat)
            d_hx += d_vis_in[:, :hash_dim]

        d_geo_out = np.zeros((n, 1 + self.embed_width), dtype=self.dtype)
        d_sigma_flat = np.asarray(d_sigma, dtype=self.dtype).reshape(n)
        d_geo_out[:, 0] = d_sigma_flat * trunc_exp_grad(cache["sigma_z"], cache["sigma"])
        if d_embedding is not None:
            d_geo_out[:, 1:] = d_embedding

        geo_grads, d_geo_in, _ = mlp_backward(self.geo_params, cache["geo"], d_geo_out)
        d_hx += d_geo_in
        d_table = self.hash_grid.backward(cache["hash"], d_hx)

        grads = [d_table]
        for group in (geo_grads, rgb_grads, vis_grads):
            for dw, db in group:
                grads.extend((dw, db))
        return grads

    # ------------------------------------------------------------------
    # single-point query

    def query(self, x, d, light_pose: Pose6D | None = None):
        """Density, color and optional visibility at one point.

        ``d`` must be a unit view direction.  The light pose is ignored by
        the light-blind variant but required by all others.
        """
        x = np.asarray(x, dtype=np.float64).reshape(1, 1, 3)
        d = np.asarray(d, dtype=np.float64).reshape(1, 3)
        light_positions = None
        light_codes = None
        if self.variant is not Variant.V0:
            if light_pose is None:
                raise ValueError(f"variant {self.variant.value} requires a light pose")
            light_positions = light_pose.translation.reshape(1, 3)
            if self.variant.uses_absolute_light:
                light_codes = self.light_code(light_pose).reshape(1, -1)
        sigma, color, vis = self.forward_samples(x, d, light_positions, light_codes)
        out_vis = float(vis[0, 0]) if vis is not None else None
        return float(sigma[0, 0]), color[0, 0].copy(), out_vis

    # ------------------------------------------------------------------
    # serialization support

    def config_dict(self) -> dict:
        hp = self.hash_grid.params
        return {
            "variant": self.variant.value,
            "hash_params": {
                "levels": hp.levels,
                "features_per_level": hp.features_per_level,
                "table_size": hp.table_size,
                "base_resolution": hp.base_resolution,
                "per_level_scale": hp.per_level_scale,
            },
            "bounds": {"center": self.bounds.center.tolist(), "radius": self.bounds.radius},
            "embed_width": self.embed_width,
            "hidden_width": self.hidden_width,
            "dtype": self.dtype.name,
        }

    @classmethod
    def from_config(cls, cfg: dict, rng: np.random.Generator | None = None) -> "RelightModel":
        return cls(
            variant=Variant.parse(cfg["variant"]),
            hash_params=HashGridParams(**cfg["hash_params"]),
            bounds=SceneBounds(np.array(cfg["bounds"]["center"]), cfg["bounds"]["radius"]),
            embed_width=cfg["embed_width"],
            hidden_width=cfg["hidden_width"],
            rng=rng,
            dtype=np.dtype(cfg["dtype"]),
        )


def build_variant(
    tag,
    hash_params: HashGridParams | None = None,
    bounds: SceneBounds | None = None,
    embed_width: int = 15,
    hidden_width: int = 64,
    seed: int | None = 0,
    dtype=np.float32,
) -> RelightModel:
    """Construct a freshly initialized model for one of the six variants."""
    variant = Variant.parse(tag)
    hash_params = hash_params or HashGridParams()
    bounds = bounds or SceneBounds(np.zeros(3), 1.0)
    rng = np.random.default_rng(seed)
    return RelightModel(
        variant,
        hash_params,
        bounds,
        embed_width=embed_width,
        hidden_width=hidden_width,
        rng=rng,
        dtype=dtype,
    )


def render_frame(
    model: RelightModel,
    camera,
    camera_pose: Pose6D,
    light_pose: Pose6D | None,
    t_near: float,
    t_far: float,
    n_coarse: int = 128,
    n_fine: int = 128,
    chunk: int = 8192,
    want_aux: bool = False,
):
    """Render a full frame deterministically (no jitter), in ray chunks.

    Returns an (H, W, 3) float32 image; with ``want_aux`` also a dict of
    (H, W) diagnostic maps (opacity, depth, and mean visibility when the
    variant predicts one).
    """
    from .geometry import backproject, pixel_centers
    from .rendering import render_rays

    uv = pixel_centers(camera)
    origins, dirs = backproject(camera, camera_pose, uv)
    density_fn, query_fn = render_functions(model, light_pose)
    rgb = np.empty((uv.shape[0], 3), dtype=np.float32)
    opacity = np.empty(uv.shape[0], dtype=np.float32)
    depth = np.empty(uv.shape[0], dtype=np.float32)
    mean_vis = (
        np.empty(uv.shape[0], dtype=np.float32) if model.variant.has_visibility_net else None
    )
    for start in range(0, uv.shape[0], chunk):
        sl = slice(start, start + chunk)
        out = render_rays(
            density_fn, query_fn, origins[sl], dirs[sl], t_near, t_far,
            n_coarse=n_coarse, n_fine=n_fine, jitter=False,
        )
        rgb[sl] = np.clip(out.rgb, 0.0, 1.0)
        opacity[sl] = out.opacity
        depth[sl] = out.depth
        if mean_vis is not None:
            mean_vis[sl] = out.mean_visibility
    h, w = camera.height, camera.width
    image = rgb.reshape(h, w, 3)
    if not want_aux:
        return image
    aux = {"opacity": opacity.reshape(h, w), "depth": depth.reshape(h, w)}
    if mean_vis is not None:
        aux["visibility"] = mean_vis.reshape(h, w)
    return image, aux


def render_functions(model: RelightModel, light_pose: Pose6D | None):
    """(density_fn, query_fn) closures for :func:`olatnerf.rendering.render_rays`."""
    light_positions = None
    light_codes = None
    if model.variant is not Variant.V0:
        if light_pose is None:
            raise ValueError(f"variant {model.variant.value} requires a light pose")
        light_positions = light_pose.translation
        if model.variant.uses_absolute_light:
            light_codes = model.light_code(light_pose)

    def density_fn(x_flat):
        return model.density(x_flat)

    def query_fn(positions, dirs):
        n_rays = positions.shape[0]
        lp = None if light_positions is None else np.broadcast_to(light_positions, (n_rays, 3))
        lc = (
            None
            if light_codes is None
            else np.broadcast_to(light_codes, (n_rays, light_codes.shape[0]))
        )
        return model.forward_samples(positions, dirs, lp, lc)

    return density_fn, query_fn
