"""Detection score container shared by the segmentation- and classifier-level detectors."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ScoreKind(Enum):
    BLS = "bls"
    ODS = "ods"
    SSIM_MAX = "ssim-max"
    BASELINE = "baseline"
    ODIN = "odin"


@dataclass(frozen=True)
class DetectionScore:
    """Score in [0, 1]; higher means more in-distribution."""

    value: float
    kind: ScoreKind

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"detection score must lie in [0, 1], got {self.value}")
