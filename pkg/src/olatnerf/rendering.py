"""Discretized volume rendering along camera rays.

Per-ray quadrature follows the standard emission-absorption model: sample
opacities ``alpha_i = 1 - exp(-sigma_i * delta_i)`` are composited
front-to-back with transmittance ``T_i = prod_{j<i}(1 - alpha_j)`` into
weights ``w_i = T_i * alpha_i``.  When per-sample visibilities are present
the sample color is modulated before quadrature (``c* = o * c``).

Sampling is two-pass: uniform stratified bins first, then extra samples drawn
by inverse-CDF from the piecewise-constant distribution the coarse weights
define.  The resampling positions are treated as constants by the gradient
path; ``composite_backward`` provides exact analytic gradients of the
compositing formula itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Ray


@dataclass
class RaySampleBatch:
    """Per-ray quadrature inputs, all arrays shaped (n_rays, n_samples[, 3]).

    ``visibility`` is optional; when present it multiplies colors before
    compositing.
    """

    t: np.ndarray
    delta: np.ndarray
    sigma: np.ndarray
    color: np.ndarray
    visibility: np.ndarray | None = None

    def validate(self) -> None:
        if self.t.ndim != 2 or self.delta.shape != self.t.shape or self.sigma.shape != self.t.shape:
            raise ValueError("t, delta and sigma must share shape (n_rays, n_samples)")
        if self.color.shape != self.t.shape + (3,):
            raise ValueError("color must have shape (n_rays, n_samples, 3)")
        if self.visibility is not None and self.visibility.shape != self.t.shape:
            raise ValueError("visibility must have shape (n_rays, n_samples)")
        if np.any(np.diff(self.t, axis=1) <= 0):
            raise ValueError("t must be strictly increasing along each ray")
        if np.any(self.delta <= 0):
            raise ValueError("delta must be positive")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be non-negative")


@dataclass
class CompositeResult:
    """Composited pixel colors plus per-sample weights and diagnostics."""

    rgb: np.ndarray
    weights: np.ndarray
    opacity: np.ndarray
    depth: np.ndarray
    valid: np.ndarray


def _alpha_transmittance(sigma: np.ndarray, delta: np.ndarray):
    alpha = 1.0 - np.exp(-sigma * delta)
    one_minus = 1.0 - alpha
    trans = np.cumprod(one_minus, axis=1)
    # Shift right so T_0 = 1; keep the full product around for T_{i+1}.
    t_before = np.concatenate([np.ones_like(trans[:, :1]), trans[:, :-1]], axis=1)
    return alpha, t_before, trans


def quadrature_weights(sigma: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Compositing weights ``T_i * alpha_i`` for (n_rays, n_samples) inputs."""
    alpha, t_before, _ = _alpha_transmittance(sigma, delta)
    return t_before * alpha


def composite(batch: RaySampleBatch, background: np.ndarray | None = None) -> CompositeResult:
    """Front-to-back composite of a sample batch into per-ray colors.

    Rays containing non-finite densities or colors are flagged invalid and
    composited to zero so callers can exclude them from losses.
    """
    sigma, color = batch.sigma, batch.color
    bad = ~np.isfinite(sigma).all(axis=1) | ~np.isfinite(color).all(axis=(1, 2))
    if batch.visibility is not None:
        bad |= ~np.isfinite(batch.visibility).all(axis=1)
    if bad.any():
        sigma = np.where(bad[:, None], 0.0, sigma)
        color = np.where(bad[:, None, None], 0.0, color)

    alpha, t_before, _ = _alpha_transmittance(sigma, batch.delta)
    weights = t_before * alpha
    eff_color = color if batch.visibility is None else batch.visibility[..., None] * color
    rgb = np.einsum("ns,nsc->nc", weights, eff_color)
    opacity = weights.sum(axis=1)
    depth = np.einsum("ns,ns->n", weights, batch.t)
    if background is not None:
        rgb = rgb + (1.0 - opacity)[:, None] * np.asarray(background, dtype=rgb.dtype)
    return CompositeResult(rgb=rgb, weights=weights, opacity=opacity, depth=depth, valid=~bad)


def composite_backward(batch: RaySampleBatch, grad_rgb: np.ndarray):
    """Gradients of the composited color w.r.t. sigma, color and visibility.

    ``grad_rgb`` is (n_rays, 3).  Returns ``(d_sigma, d_color, d_visibility)``
    with ``d_visibility`` None when the batch has no visibilities.  Gradients
    of rays flagged invalid by :func:`composite` are zero.
    """
    sigma, color = batch.sigma, batch.color
    bad = ~np.isfinite(sigma).all(axis=1) | ~np.isfinite(color).all(axis=(1, 2))
    if batch.visibility is not None:
        bad |= ~np.isfinite(batch.visibility).all(axis=1)
    grad_rgb = np.where(bad[:, None], 0.0, grad_rgb)
    sigma = np.where(bad[:, None], 0.0, sigma)
    color = np.where(bad[:, None, None], 0.0, color)

    alpha, t_before, trans = _alpha_transmittance(sigma, batch.delta)
    weights = t_before * alpha
    if batch.visibility is None:
        eff_color = color
        d_color = weights[..., None] * grad_rgb[:, None, :]
        d_vis = None
    else:
        vis = np.where(bad[:, None], 0.0, batch.visibility)
        eff_color = vis[..., None] * color
        d_color = (weights * vis)[..., None] * grad_rgb[:, None, :]
        d_vis = weights * np.einsum("nsc,nc->ns", color, grad_rgb)

    # Per-sample color response projected on the upstream gradient.
    response = np.einsum("nsc,nc->ns", eff_color, grad_rgb)
    weighted = weights * response
    # suffix[i] = sum_{j>i} w_j * response_j, via a reversed cumulative sum.
    suffix = np.flip(np.cumsum(np.flip(weighted, axis=1), axis=1), axis=1) - weighted
    d_sigma = batch.delta * (trans * response - suffix)
    return d_sigma, d_color, d_vis


def stratified_t(
    t_near: float,
    t_far: float,
    n_bins: int,
    n_rays: int,
    jitter: bool,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One sample per equal bin of [t_near, t_far] for each of n_rays rays."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    edges = np.linspace(t_near, t_far, n_bins + 1)
    lo, width = edges[:-1], np.diff(edges)
    if jitter:
        if rng is None:
            raise ValueError("jitter requires an rng")
        u = rng.uniform(size=(n_rays, n_bins))
    else:
        u = np.full((n_rays, n_bins), 0.5)
    return lo[None, :] + u * width[None, :]


def stratified_samples(
    ray: Ray, n_coarse: int, jitter: bool = False, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Stratified t values along a single ray."""
    return stratified_t(ray.t_near, ray.t_far, n_coarse, 1, jitter, rng)[0]


def _bin_edges_from_centers(t: np.ndarray) -> np.ndarray:
    """Reconstruct bin edges around sample centers (midpoints, extended ends)."""
    if t.shape[1] < 2:
        # Degenerate single-sample rays: a token unit-width bin.
        return np.concatenate([t - 0.5, t + 0.5], axis=1)
    mids = 0.5 * (t[:, 1:] + t[:, :-1])
    first = t[:, :1] - 0.5 * (t[:, 1:2] - t[:, :1])
    last = t[:, -1:] + 0.5 * (t[:, -1:] - t[:, -2:-1])
    return np.concatenate([first, mids, last], axis=1)


def _rowwise_searchsorted(sorted_rows: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Vectorized per-row searchsorted for row-sorted 2D arrays in [0, 1]."""
    n_rows, n_cols = sorted_rows.shape
    offsets = 2.0 * np.arange(n_rows)[:, None]
    flat = (sorted_rows + offsets).ravel()
    idx = np.searchsorted(flat, (values + offsets).ravel(), side="right")
    return idx.reshape(values.shape) - np.arange(n_rows)[:, None] * n_cols


def hierarchical_samples(
    t_coarse: np.ndarray,
    weights: np.ndarray,
    n_fine: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Extra t values drawn by inverse-CDF from normalized coarse weights.

    The coarse samples define a piecewise-constant density over bins
    reconstructed around them; all-zero weight rows fall back to a uniform
    distribution.  Accepts (n,) or (n_rays, n) inputs.  Without an rng the
    CDF is probed at deterministic stratified midpoints, which keeps
    evaluation renders reproducible.
    """
    single = t_coarse.ndim == 1
    t = np.atleast_2d(np.asarray(t_coarse, dtype=np.float64))
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    if w.shape != t.shape:
        raise ValueError("weights must match t_coarse's shape")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")

    edges = _bin_edges_from_centers(t)
    total = w.sum(axis=1, keepdims=True)
    uniform = ~(total[:, 0] > 1e-12)
    pdf = np.where(uniform[:, None], 1.0 / w.shape[1], w / np.where(total > 0, total, 1.0))
    cdf = np.concatenate([np.zeros((t.shape[0], 1)), np.cumsum(pdf, axis=1)], axis=1)
    cdf[:, -1] = 1.0

    if rng is None:
        u = np.broadcast_to((np.arange(n_fine) + 0.5) / n_fine, (t.shape[0], n_fine))
    else:
        u = rng.uniform(size=(t.shape[0], n_fine))
    inds = np.clip(_rowwise_searchsorted(cdf, u) - 1, 0, t.shape[1] - 1)
    cdf_lo = np.take_along_axis(cdf, inds, axis=1)
    bin_p = np.take_along_axis(pdf, inds, axis=1)
    frac = (u - cdf_lo) / np.where(bin_p > 0, bin_p, 1.0)
    lo = np.take_along_axis(edges, inds, axis=1)
    hi = np.take_along_axis(edges, inds + 1, axis=1)
    out = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
    return out[0] if single else out


def sample_ray_points(
    density_fn,
    origins: np.ndarray,
    dirs: np.ndarray,
    t_near: float,
    t_far: float,
    n_coarse: int,
    n_fine: int,
    jitter: bool,
    rng: np.random.Generator | None,
):
    """Two-pass sample placement; returns merged, sorted (t, delta, positions).

    ``density_fn`` maps flat (N, 3) positions to densities and is only used
    to form the coarse importance distribution; the returned positions are
    constants as far as gradients are concerned.
    """
    n_rays = origins.shape[0]
    t = stratified_t(t_near, t_far, n_coarse, n_rays, jitter, rng)
    if n_fine > 0:
        x_coarse = origins[:, None, :] + t[..., None] * dirs[:, None, :]
        sigma = density_fn(x_coarse.reshape(-1, 3)).reshape(n_rays, n_coarse)
        delta_c = _deltas(t, t_far)
        w = quadrature_weights(np.maximum(sigma, 0.0), delta_c)
        t_fine = hierarchical_samples(t, w, n_fine, rng if jitter else None)
        t = np.sort(np.concatenate([t, t_fine], axis=1), axis=1)
    delta = _deltas(t, t_far)
    positions = origins[:, None, :] + t[..., None] * dirs[:, None, :]
    return t, delta, positions


def _deltas(t: np.ndarray, t_far: float) -> np.ndarray:
    """Inter-sample spacings with the final interval running out to t_far."""
    return np.concatenate([np.diff(t, axis=1), np.maximum(t_far - t[:, -1:], 0.0)], axis=1)


@dataclass
class RenderOutput:
    """Rendered colors plus per-ray diagnostics."""

    rgb: np.ndarray
    opacity: np.ndarray
    depth: np.ndarray
    mean_visibility: np.ndarray | None
    valid: np.ndarray


def render_rays(
    density_fn,
    query_fn,
    origins: np.ndarray,
    dirs: np.ndarray,
    t_near: float,
    t_far: float,
    n_coarse: int = 128,
    n_fine: int = 128,
    jitter: bool = False,
    rng: np.random.Generator | None = None,
    background: np.ndarray | None = None,
) -> RenderOutput:
    """Render a batch of rays against a queryable field.

    ``query_fn(positions, dirs)`` receives (n_rays, n_samples, 3) positions
    and per-ray directions and returns ``(sigma, color, visibility-or-None)``.
    """
    t, delta, positions = sample_ray_points(
        density_fn, origins, dirs, t_near, t_far, n_coarse, n_fine, jitter, rng
    )
    sigma, color, vis = query_fn(positions, dirs)
    batch = RaySampleBatch(t=t, delta=delta, sigma=sigma, color=color, visibility=vis)
    result = composite(batch, background=background)
    mean_vis = None
    if vis is not None:
        denom = np.maximum(result.opacity, 1e-9)
        mean_vis = np.einsum("ns,ns->n", result.weights, vis) / denom
    return RenderOutput(
        rgb=result.rgb,
        opacity=result.opacity,
        depth=result.depth,
        mean_visibility=mean_vis,
        valid=result.valid,
    )
