"""Color-prototype segmenter.

A stand-in for a trained segmentation network: each class is a prototype
RGB color, each pixel gets logits proportional to negative color distance,
and a constant distance floor plays the background class. Pixels far from
every prototype therefore segment as background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .segscore import SegmentationBackend
from .tensorio import RgbImage, SegMap


@dataclass(frozen=True)
class ToySegmenter(SegmentationBackend):
    prototypes: np.ndarray
    sharpness: float = 25.0
    background_floor: float = 0.35

    def __post_init__(self):
        p = np.asarray(self.prototypes, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
            raise ValueError("prototypes must be an N x 3 color array, N >= 1")
        if len({tuple(row) for row in p.tolist()}) != p.shape[0]:
            raise ValueError("prototypes must be distinct")
        if self.sharpness <= 0:
            raise ValueError("sharpness must be > 0")
        if self.background_floor <= 0:
            raise ValueError("background distance floor must be > 0")
        object.__setattr__(self, "prototypes", p)

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]

    def segment(self, x: RgbImage) -> SegMap:
        return toy_segment(x, self)


def toy_segment(x: RgbImage, s: ToySegmenter) -> SegMap:
    """Per-pixel softmax over negative scaled distances to the prototypes."""
    diffs = x.data[:, :, None, :] - s.prototypes[None, None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=3))
    floor = np.full(dists.shape[:2] + (1,), s.background_floor)
    logits = -s.sharpness * np.concatenate([dists, floor], axis=2)
    logits -= logits.max(axis=2, keepdims=True)
    expd = np.exp(logits)
    return SegMap(expd / expd.sum(axis=2, keepdims=True))
