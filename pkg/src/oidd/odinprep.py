"""Temperature-scaled softmax, the ODIN input perturbation, and the
classifier-level detectors (baseline max-softmax and ODIN) used as
comparison points.

The shipped classifier is multinomial-logistic (linear logits over the
flattened image), so the gradient of the log max-softmax is available in
closed form and the whole perturbation chain is exactly testable against
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteLogit, ShapeMismatch
from .scores import DetectionScore, ScoreKind
from .tensorio import DTYPE_FLOAT32, RgbImage, TensorFile, read_tensors, write_tensors


@dataclass(frozen=True)
class LinearClassifier:
    """Logits(x) = weights @ flat(x) + bias, over N >= 2 classes.

    `weights` is N x d with d = h*w*3 for the images it accepts; the
    flattening order is row-major (see RgbImage.flat).
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ShapeMismatch(f"weights {w.shape} / bias {b.shape} are inconsistent")
        if w.shape[0] < 2:
            raise ValueError("classifier needs at least 2 classes")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("classifier parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: RgbImage) -> np.ndarray:
        v = x.flat()
        if v.shape[0] != self.input_dim:
            raise ShapeMismatch(
                f"classifier expects input dim {self.input_dim}, image has {v.shape[0]}"
            )
        return self.weights @ v + self.bias


@dataclass(frozen=True)
class OdinParams:
    zeta: float = 0.0014
    temp: float = 1000.0

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("perturbation magnitude must be >= 0")
        if self.temp <= 0:
            raise ValueError("temperature must be > 0")


def softmax_t(logits: np.ndarray, temp: float) -> np.ndarray:
    """Temperature-scaled softmax with max-subtraction for stability."""
    if temp <= 0:
        raise ValueError("temperature must be > 0")
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteLogit(f"logits contain non-finite values: {z}")
    z = z / temp
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def grad_log_maxsoftmax(x: RgbImage, clf: LinearClassifier, temp: float) -> np.ndarray:
    """Analytic gradient of log max_i softmax_t(logits(x), temp) w.r.t. x.

    For linear logits this is (1/T) * (w_star - sum_j p_j w_j) where p is
    the temperature-scaled softmax and star the argmax class (ties resolve
    to the lowest index). Returned flat, length h*w*3.
    """
    p = softmax_t(clf.logits(x), temp)
    star = int(np.argmax(p))
    return (clf.weights[star] - p @ clf.weights) / temp


def perturb(x: RgbImage, clf: LinearClassifier, params: OdinParams) -> RgbImage:
    """ODIN preprocessing: x - zeta * sign(-grad log max-softmax), clamped to [0, 1].

    sign(0) = 0, so coordinates with zero gradient are untouched.
    """
    g = grad_log_maxsoftmax(x, clf, params.temp).reshape(x.data.shape)
    moved = x.data - params.zeta * np.sign(-g)
    return RgbImage(np.clip(moved, 0.0, 1.0))


def baseline_score(x: RgbImage, clf: LinearClassifier) -> DetectionScore:
    """Max softmax score at temperature 1 (the baseline detector)."""
    p = softmax_t(clf.logits(x), 1.0)
    return DetectionScore(float(p.max()), ScoreKind.BASELINE)


def odin_score(x: RgbImage, clf: LinearClassifier, params: OdinParams) -> DetectionScore:
    """Temperature-scaled max softmax of the perturbed input."""
    p = softmax_t(clf.logits(perturb(x, clf, params)), params.temp)
    return DetectionScore(float(p.max()), ScoreKind.ODIN)


def save_classifier(path: str | Path, clf: LinearClassifier) -> None:
    """Two concatenated OIDT records: float32 weights (N x d), then bias (N)."""
    write_tensors(
        path,
        [
            TensorFile(DTYPE_FLOAT32, clf.weights.astype(np.float32)),
            TensorFile(DTYPE_FLOAT32, clf.bias.astype(np.float32)),
        ],
    )


def load_classifier(path: str | Path) -> LinearClassifier:
    records = read_tensors(path)
    if len(records) != 2:
        raise ShapeMismatch(f"classifier file must hold 2 records, found {len(records)}")
    w, b = records[0].data, records[1].data
    if w.ndim != 2 or b.ndim != 1:
        raise ShapeMismatch(f"expected 2-d weights and 1-d bias, got {w.shape} / {b.shape}")
    return LinearClassifier(w.astype(np.float64), b.astype(np.float64))
