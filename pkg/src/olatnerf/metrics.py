"""Image-quality metrics: PSNR and Gaussian-windowed SSIM.

Both operate on float images in [0, 1] (dynamic range 1).  SSIM uses the
classic 11x11 Gaussian window with sigma 1.5, stabilizers K1=0.01 / K2=0.03,
window-weighted moments, and 'valid' windowing; multi-channel images are
averaged over channels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03

PSNR_CAP_DB = 100.0


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; identical images give +inf."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window() -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2.0
    x = np.arange(SSIM_WINDOW) - half
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


_WINDOW = _gaussian_window()


def _ssim_single(a: np.ndarray, b: np.ndarray) -> float:
    c1 = _K1**2
    c2 = _K2**2
    win = _WINDOW

    def smooth(img):
        return convolve2d(img, win, mode="valid")

    mu1 = smooth(a)
    mu2 = smooth(b)
    var1 = smooth(a * a) - mu1 * mu1
    var2 = smooth(b * b) - mu2 * mu2
    cov = smooth(a * b) - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean structural similarity over valid windows and channels."""
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    if a.ndim != 3:
        raise ValueError("images must be HxW or HxWxC")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM"
        )
    return float(np.mean([_ssim_single(a[..., c], b[..., c]) for c in range(a.shape[2])]))


@dataclass
class MetricReport:
    """Per-frame scores plus split-level means.

    Infinite per-frame PSNR values (identical images) are capped at
    ``PSNR_CAP_DB`` when aggregating.  ``ssim`` entries may be None when the
    images are smaller than the SSIM window.
    """

    frames: list[dict] = field(default_factory=list)

    def add(self, view: int, light: int, psnr_db: float, ssim_value: float | None) -> None:
        self.frames.append(
            {"view": view, "light": light, "psnr": psnr_db, "ssim": ssim_value}
        )

    @property
    def count(self) -> int:
        return len(self.frames)

    @property
    def mean_psnr(self) -> float:
        if not self.frames:
            raise ValueError("empty report")
        return float(np.mean([min(f["psnr"], PSNR_CAP_DB) for f in self.frames]))

    @property
    def mean_ssim(self) -> float | None:
        values = [f["ssim"] for f in self.frames if f["ssim"] is not None]
        if not values:
            return None
        return float(np.mean(values))

    def to_dict(self) -> dict:
        frames = [
            {**f, "psnr": min(f["psnr"], PSNR_CAP_DB)}
            for f in self.frames
        ]
        return {
            "count": self.count,
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "frames": frames,
        }

    def save_json(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
        return path

    def save_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("view,light,psnr,ssim\n")
            for f in self.frames:
                ssim_s = "" if f["ssim"] is None else f"{f['ssim']:.6f}"
                fh.write(f"{f['view']},{f['light']},{min(f['psnr'], PSNR_CAP_DB):.6f},{ssim_s}\n")
        return path
