"""Structural similarity over binary foreground maps.

Uniform-window SSIM with the per-window score clamped at zero, so the
aggregate stays in [0, 1] and thresholding against it is monotone. Maps are
compared as float fields in [0, 1]; windows slide with stride 1 over valid
positions only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatch, WindowTooLarge
from .tensorio import BinaryMap


@dataclass(frozen=True)
class SsimParams:
    window: int = 7
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be a positive odd integer")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("stabilizers k1, k2 must be > 0")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be > 0")


def _window_moments(field: np.ndarray, window: int):
    """Per-window mean and population second moment, stride-1 valid layout."""
    views = sliding_window_view(field, (window, window))
    area = float(window * window)
    mean = views.sum(axis=(2, 3)) / area
    sq = (views**2).sum(axis=(2, 3)) / area
    return views, mean, sq


def ssim(a: BinaryMap, b: BinaryMap, p: SsimParams = SsimParams()) -> float:
    """Mean clamped SSIM over all valid window positions.

    Symmetric in its arguments and exactly 1.0 when the maps agree.
    """
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(
            f"map shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    h, w = a.data.shape
    if p.window > h or p.window > w:
        raise WindowTooLarge(
            f"window {p.window} exceeds map extent {h}x{w}"
        )
    fa = a.data.astype(np.float64)
    fb = b.data.astype(np.float64)
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    va, mu_a, sq_a = _window_moments(fa, p.window)
    vb, mu_b, sq_b = _window_moments(fb, p.window)
    area = float(p.window * p.window)
    cross = (va * vb).sum(axis=(2, 3)) / area
    var_a = sq_a - mu_a**2
    var_b = sq_b - mu_b**2
    cov = cross - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    con = (2.0 * cov + c2) / (var_a + var_b + c2)
    per_window = np.maximum(lum * con, 0.0)
    return math.fsum(per_window.ravel(order="C")) / per_window.size
