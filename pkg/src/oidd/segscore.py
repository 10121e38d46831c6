"""Foreground scoring of segmentation maps.

A pixel is foreground when its argmax channel is a training class rather
than the background channel; the detector score is the mean winning
probability over those pixels (BLS), optionally computed on the
ODIN-perturbed input instead (ODS).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch
from .odinprep import LinearClassifier, OdinParams, perturb
from .scores import DetectionScore, ScoreKind
from .tensorio import RgbImage, SegMap, as_segmap, read_tensor

__all__ = [
    "DetectionScore",
    "ScoreKind",
    "SegmentationBackend",
    "FileSegmapBackend",
    "v_score",
    "bls",
    "ods",
    "detect_alg2",
]


class SegmentationBackend(ABC):
    """Produces a per-pixel probability map for an image.

    The trained segmentation network itself is out of scope; this seam is
    where one plugs in, via files exported from its native runtime or via
    the toy color-prototype segmenter.
    """

    @abstractmethod
    def segment(self, x: RgbImage) -> SegMap:
        raise NotImplementedError


class FileSegmapBackend(SegmentationBackend):
    """Serves a segmentation map computed externally and stored as OIDT.

    The map is loaded lazily and must match the height/width of the image
    it is asked about. Instances are safe for concurrent reads of distinct
    files; a loaded map is immutable.
    """

    def __init__(self, path: str | Path, num_classes: int):
        self._path = Path(path)
        self._num_classes = num_classes
        self._map: SegMap | None = None

    def segment(self, x: RgbImage) -> SegMap:
        if self._map is None:
            self._map = as_segmap(read_tensor(self._path), self._num_classes)
        m = self._map
        if (m.height, m.width) != (x.height, x.width):
            raise ShapeMismatch(
                f"stored map is {m.height}x{m.width}, image is {x.height}x{x.width}"
            )
        return m


def v_score(q: np.ndarray) -> float:
    """Winning probability of a per-pixel vector, 0 if background wins.

    Index N (the last entry) is background. A tie between a class and the
    background resolves to the class.
    """
    q = np.asarray(q, dtype=np.float64)
    i = int(np.argmax(q))  # first max index, so a class beats a tied background
    return float(q[i]) if i < q.shape[0] - 1 else 0.0


def bls(m: SegMap) -> DetectionScore:
    """Mean winning softmax value over foreground pixels.

    An empty foreground yields 0 (maximally OOD) rather than an error: an
    image with no class-relevant pixels is exactly what the detector is
    meant to flag.
    """
    winners = np.argmax(m.data, axis=2)
    foreground = winners != m.num_classes
    count = int(foreground.sum())
    if count == 0:
        return DetectionScore(0.0, ScoreKind.BLS)
    values = np.max(m.data, axis=2)
    return DetectionScore(float(values[foreground].sum() / count), ScoreKind.BLS)


def ods(
    x: RgbImage,
    clf: LinearClassifier,
    seg: SegmentationBackend,
    zeta: float,
    temp: float,
) -> DetectionScore:
    """BLS of the segmentation of the ODIN-perturbed input."""
    perturbed = perturb(x, clf, OdinParams(zeta=zeta, temp=temp))
    return DetectionScore(bls(seg.segment(perturbed)).value, ScoreKind.ODS)


def detect_alg2(
    t: RgbImage,
    seg: SegmentationBackend,
    ds: ScoreKind,
    eps: float,
    clf: LinearClassifier | None = None,
    odin_params: OdinParams | None = None,
) -> int:
    """Verdict 1 (OOD) iff the chosen score is strictly below eps.

    `clf` and `odin_params` are required for the ODS score kind only.
    """
    if not (0.0 <= eps <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {eps}")
    if ds == ScoreKind.BLS:
        score = bls(seg.segment(t))
    elif ds == ScoreKind.ODS:
        if clf is None:
            raise ValueError("ODS needs a classifier for the input perturbation")
        p = odin_params or OdinParams()
        score = ods(t, clf, seg, p.zeta, p.temp)
    else:
        raise ValueError(f"score kind {ds} is not a segmentation-map score")
    return 1 if score.value < eps else 0
