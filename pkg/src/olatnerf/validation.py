"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str, shape: tuple | None = None, dtype=None) -> np.ndarray:
    """Coerce to a floating ndarray, optionally enforcing an exact shape."""
    arr = np.asarray(x, dtype=dtype)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def check_unit(v: np.ndarray, name: str, atol: float = 1e-6) -> None:
    norm = np.linalg.norm(v, axis=-1)
    if not np.allclose(norm, 1.0, atol=atol):
        raise ValueError(f"{name} must be unit-length (|norm - 1| <= {atol})")


def check_positive(value, name: str) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def check_in_range(value, name: str, lo, hi, *, inclusive: bool = True) -> None:
    ok = lo <= value <= hi if inclusive else lo < value < hi
    if not ok:
        bounds = "[{}, {}]" if inclusive else "({}, {})"
        raise ValueError(f"{name} must lie in {bounds.format(lo, hi)}, got {value}")
