"""Input encodings: Fourier features, real spherical harmonics, hash grid.

Three encodings feed the relighting models:

* ``fourier_encode`` lifts a flattened 12-component rigid pose to 156
  sinusoidal features (identity block plus six sin/cos octaves).
* ``sh_encode`` evaluates the first 16 real spherical-harmonic basis
  functions (degrees 0..3) at unit directions.
* ``HashGrid`` is a trainable multiresolution feature table addressed by
  spatial hashing and read with trilinear interpolation; its backward pass
  scatters gradients into the touched table rows deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOURIER_OCTAVES = 6
FOURIER_INPUT_DIM = 12
FOURIER_OUTPUT_DIM = FOURIER_INPUT_DIM * (1 + 2 * FOURIER_OCTAVES)

SH_DIM = 16

# Per-dimension multipliers for the spatial hash (x is left unmultiplied).
_HASH_PRIMES = np.array([1, 2654435761, 805459861], dtype=np.uint64)

_CORNER_OFFSETS = np.array(
    [[i >> 2 & 1, i >> 1 & 1, i & 1] for i in range(8)], dtype=np.int64
)


def fourier_encode(v) -> np.ndarray:
    """Sinusoidal features ``[v, sin(2^k pi v), cos(2^k pi v)]`` for k = 0..5.

    Accepts a 12-vector or an (N, 12) batch; returns 156 features per row.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    if v.shape[-1] != FOURIER_INPUT_DIM:
        raise ValueError(f"expected {FOURIER_INPUT_DIM} input components, got {v.shape[-1]}")
    blocks = [v]
    for k in range(FOURIER_OCTAVES):
        phase = (2.0**k) * np.pi * v
        blocks.append(np.sin(phase))
        blocks.append(np.cos(phase))
    out = np.concatenate(blocks, axis=-1)
    return out[0] if single else out


def sh_encode(d) -> np.ndarray:
    """First 16 real spherical-harmonic basis values at unit directions.

    Ordering is degree-major with m running from -l to +l.  Accepts a
    3-vector or an (N, 3) batch; directions must be unit-length to 1e-6.
    """
    d = np.asarray(d)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    if d.shape[-1] != 3:
        raise ValueError(f"expected 3-component directions, got shape {d.shape}")
    norm = np.linalg.norm(d, axis=-1)
    if not np.allclose(norm, 1.0, atol=1e-6):
        raise ValueError("directions must be unit-length to 1e-6")

    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    xx, yy, zz = x * x, y * y, z * z
    out = np.empty((d.shape[0], SH_DIM), dtype=d.dtype)
    out[:, 0] = 0.28209479177387814
    out[:, 1] = 0.4886025119029199 * y
    out[:, 2] = 0.4886025119029199 * z
    out[:, 3] = 0.4886025119029199 * x
    out[:, 4] = 1.0925484305920792 * x * y
    out[:, 5] = 1.0925484305920792 * y * z
    out[:, 6] = 0.31539156525252005 * (3.0 * zz - 1.0)
    out[:, 7] = 1.0925484305920792 * x * z
    out[:, 8] = 0.5462742152960396 * (xx - yy)
    out[:, 9] = 0.5900435899266435 * y * (3.0 * xx - yy)
    out[:, 10] = 2.890611442640554 * x * y * z
    out[:, 11] = 0.4570457994644658 * y * (5.0 * zz - 1.0)
    out[:, 12] = 0.3731763325901154 * z * (5.0 * zz - 3.0)
    out[:, 13] = 0.4570457994644658 * x * (5.0 * zz - 1.0)
    out[:, 14] = 1.445305721320277 * z * (xx - yy)
    out[:, 15] = 0.5900435899266435 * x * (xx - 3.0 * yy)
    return out[0] if single else out


def geometric_scale(base_resolution: int, max_resolution: int, levels: int) -> float:
    """Per-level growth factor so the top level reaches ``max_resolution``."""
    if levels < 2:
        return 2.0
    return float(np.exp(np.log(max_resolution / base_resolution) / (levels - 1)))


@dataclass(frozen=True)
class HashGridParams:
    """Static configuration of a multiresolution hash grid."""

    levels: int = 16
    features_per_level: int = 2
    table_size: int = 2**19
    base_resolution: int = 16
    per_level_scale: float = geometric_scale(16, 2048, 16)

    def __post_init__(self):
        if self.levels < 1 or self.features_per_level < 1:
            raise ValueError("levels and features_per_level must be >= 1")
        if self.base_resolution < 2:
            raise ValueError("base_resolution must be >= 2")
        if self.table_size < 1 or self.table_size & (self.table_size - 1):
            raise ValueError("table_size must be a power of two")
        if not self.per_level_scale > 1.0:
            raise ValueError("per_level_scale must exceed 1")

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_level

    def level_resolutions(self) -> np.ndarray:
        scales = self.per_level_scale ** np.arange(self.levels)
        return np.floor(self.base_resolution * scales).astype(np.int64)


# Desk-scale profile: smaller table and fewer levels, top resolution 256.
DESK_HASH_PARAMS = HashGridParams(
    levels=8,
    features_per_level=2,
    table_size=2**15,
    base_resolution=16,
    per_level_scale=geometric_scale(16, 256, 8),
)


class HashGrid:
    """Trainable multiresolution hash encoding of points in the unit cube.

    The table is an ndarray of shape (levels, table_size, features_per_level)
    owned by the caller (it is a model parameter).  Inputs outside [0, 1]^3
    are clamped and counted in ``clamped_inputs`` rather than rejected.
    """

    def __init__(self, params: HashGridParams, table: np.ndarray | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.params = params
        shape = (params.levels, params.table_size, params.features_per_level)
        if table is None:
            rng = rng or np.random.default_rng()
            table = rng.uniform(-1e-4, 1e-4, size=shape).astype(dtype)
        if table.shape != shape:
            raise ValueError(f"table must have shape {shape}, got {table.shape}")
        self.table = table
        self.resolutions = params.level_resolutions()
        self.clamped_inputs = 0

    @property
    def output_dim(self) -> int:
        return self.params.output_dim

    def _corner_data(self, x: np.ndarray):
        """Hashed corner indices (N, L, 8) and trilinear weights (N, L, 8)."""
        n = x.shape[0]
        levels = self.params.levels
        mask = np.uint64(self.params.table_size - 1)
        idx = np.empty((n, levels, 8), dtype=np.int64)
        weights = np.empty((n, levels, 8), dtype=x.dtype)
        for lvl, res in enumerate(self.resolutions):
            scaled = x * res
            base = np.floor(scaled)
            frac = scaled - base
            corners = base[:, None, :].astype(np.int64) + _CORNER_OFFSETS[None]
            hashed = corners.astype(np.uint64) * _HASH_PRIMES
            idx[:, lvl] = ((hashed[..., 0] ^ hashed[..., 1] ^ hashed[..., 2]) & mask).astype(
                np.int64
            )
            w = np.where(_CORNER_OFFSETS[None].astype(bool), frac[:, None, :], 1.0 - frac[:, None, :])
            weights[:, lvl] = w[..., 0] * w[..., 1] * w[..., 2]
        return idx, weights

    def forward(self, x, with_cache: bool = False):
        """Encode points (N, 3) into (N, levels * features_per_level).

        With ``with_cache=True`` also returns the corner indices/weights
        needed by :meth:`backward`.
        """
        x = np.atleast_2d(np.asarray(x, dtype=self.table.dtype))
        outside = (x < 0.0) | (x > 1.0)
        if outside.any():
            self.clamped_inputs += int(np.count_nonzero(outside.any(axis=1)))
            x = np.clip(x, 0.0, 1.0)
        idx, weights = self._corner_data(x)
        n = x.shape[0]
        feats = np.empty((n, self.params.levels, self.params.features_per_level),
                         dtype=self.table.dtype)
        for lvl in range(self.params.levels):
            corner_feats = self.table[lvl][idx[:, lvl]]
            feats[:, lvl] = np.einsum("nc,ncf->nf", weights[:, lvl], corner_feats)
        out = feats.reshape(n, self.output_dim)
        if with_cache:
            return out, (idx, weights)
        return out

    def backward(self, cache, grad_out: np.ndarray) -> np.ndarray:
        """Accumulate output gradients into a table-shaped gradient array.

        Accumulation uses bincount per level/feature, which sums in input
        order and is therefore deterministic.
        """
        idx, weights = cache
        n = grad_out.shape[0]
        levels = self.params.levels
        nfeat = self.params.features_per_level
        grad = grad_out.reshape(n, levels, nfeat)
        d_table = np.zeros_like(self.table)
        t_size = self.params.table_size
        for lvl in range(levels):
            flat_idx = idx[:, lvl].ravel()
            contrib = weights[:, lvl, :, None] * grad[:, lvl, None, :]
            for f in range(nfeat):
                d_table[lvl, :, f] = np.bincount(
                    flat_idx, weights=contrib[..., f].ravel().astype(np.float64),
                    minlength=t_size,
                )
        return d_table
