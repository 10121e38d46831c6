"""Detection evaluation: exact ROC/AUROC/TNR metrics, threshold
calibration, a deterministic synthetic corpus generator, and the driver
that runs detectors against corpus splits.

Score orientation is fixed across the library: higher means more
in-distribution, and a detector flags OOD when its score falls strictly
below the threshold. Positives are in-distribution samples.

Metrics are computed in exact rational arithmetic from the score
comparisons, so the trapezoidal area under the ROC agrees with the
pairwise ranking statistic to the last bit, ties included.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateLabels, MissingSplit, UnknownDetector
from .felzseg import CenterParams, FelzParams, n_r
from .odinprep import LinearClassifier, OdinParams, baseline_score, odin_score
from .refdetect import LabeledCorpus, build_reference_set, detect_alg3
from .segscore import bls, ods
from .ssim import SsimParams
from .tensorio import BinaryMap, RgbImage
from .toyseg import ToySegmenter

IN_DIST = "in_distribution"
OOD = "ood"

DETECTOR_NAMES = ("bls", "ods", "ssim-max", "baseline", "odin")
SPLIT_NAMES = ("in_dist_shifted", "ood", "ood_spurious", "ood_novel")


@dataclass(frozen=True)
class ScoredSample:
    score: float
    truth: str
    tag: str = ""

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score!r}")
        if self.truth not in (IN_DIST, OOD):
            raise ValueError(f"truth must be {IN_DIST!r} or {OOD!r}")


@dataclass(frozen=True)
class EvalReport:
    roc: tuple[tuple[float, float], ...]
    auroc: float
    tnr_at_95tpr: float
    epsilon_at_95tpr: float
    positives: int
    negatives: int

    def __post_init__(self):
        pts = tuple((float(f), float(t)) for f, t in self.roc)
        object.__setattr__(self, "roc", pts)
        if pts[0] != (0.0, 0.0) or pts[-1] != (1.0, 1.0):
            raise ValueError("ROC must run from (0,0) to (1,1)")
        for (f0, t0), (f1, t1) in zip(pts, pts[1:]):
            if f1 < f0 or t1 < t0:
                raise ValueError("ROC points must be monotone nondecreasing")
        if not (0.0 <= self.auroc <= 1.0 and 0.0 <= self.tnr_at_95tpr <= 1.0):
            raise ValueError("auroc and tnr must lie in [0, 1]")


def _split_scores(samples: Sequence[ScoredSample]) -> tuple[list[float], list[float]]:
    pos = sorted(s.score for s in samples if s.truth == IN_DIST)
    neg = sorted(s.score for s in samples if s.truth == OOD)
    if not pos or not neg:
        raise DegenerateLabels("need at least one positive and one negative")
    return pos, neg


def _exact_roc(pos: list[float], neg: list[float]) -> list[tuple[Fraction, Fraction]]:
    """ROC vertices as exact fractions, swept over distinct scores and the
    two infinite sentinels, sorted and deduplicated."""
    p, n = len(pos), len(neg)
    points = {(Fraction(0), Fraction(0)), (Fraction(1), Fraction(1))}
    for s in set(pos) | set(neg):
        tpr = Fraction(p - bisect_left(pos, s), p)
        fpr = Fraction(n - bisect_left(neg, s), n)
        points.add((fpr, tpr))
    return sorted(points)


def roc_curve(samples: Sequence[ScoredSample]) -> tuple[tuple[float, float], ...]:
    pos, neg = _split_scores(samples)
    return tuple((float(f), float(t)) for f, t in _exact_roc(pos, neg))


def auroc(samples: Sequence[ScoredSample]) -> float:
    """Trapezoidal area under the exact ROC polygon."""
    pos, neg = _split_scores(samples)
    pts = _exact_roc(pos, neg)
    area = Fraction(0)
    for (f0, t0), (f1, t1) in zip(pts, pts[1:]):
        area += (f1 - f0) * (t0 + t1) / 2
    return float(area)

def auroc_mann_whitney(samples: Sequence[ScoredSample]) -> float:
    """Pairwise ranking statistic: P(pos > neg) + half the tie mass.

    Kept as an independent route to the same quantity as `auroc`; the two
    must agree exactly, which pins down the tie handling of both.
    """
    pos, neg = _split_scores(samples)
    greater = 0
    equal = 0
    for s in pos:
        lo = bisect_left(neg, s)
        greater += lo
        equal += bisect_right(neg, s) - lo
    return float(Fraction(2 * greater + equal, 2 * len(pos) * len(neg)))


def calibrate_epsilon(scores: Sequence[float], target_tpr: float = 0.95) -> float:
    """Largest observed score value accepting at least target_tpr of the
    calibration scores under the strict score < epsilon rejection rule."""
    if not (0.0 < target_tpr <= 1.0):
        raise ValueError(f"target_tpr must lie in (0, 1], got {target_tpr}")
    if not scores:
        raise ValueError("calibration needs at least one score")
    ordered = sorted(scores)
    n = len(ordered)
    for eps in sorted(set(ordered), reverse=True):
        if (n - bisect_left(ordered, eps)) / n >= target_tpr:
            return eps
    return ordered[0]  # unreachable: the smallest score accepts everything


def tnr_at_tpr(
    samples: Sequence[ScoredSample], target_tpr: float = 0.95
) -> tuple[float, float]:
    """True-negative rate at the threshold calibrated on the positives."""
    pos, neg = _split_scores(samples)
    eps = calibrate_epsilon(pos, target_tpr)
    tnr = bisect_left(neg, eps) / len(neg)
    return tnr, eps


def evaluate(samples: Sequence[ScoredSample], target_tpr: float = 0.95) -> EvalReport:
    pos, neg = _split_scores(samples)
    tnr, eps = tnr_at_tpr(samples, target_tpr)
    return EvalReport(
        roc=roc_curve(samples),
        auroc=auroc(samples),
        tnr_at_95tpr=tnr,
        epsilon_at_95tpr=eps,
        positives=len(pos),
        negatives=len(neg),
    )


# ---------------------------------------------------------------------------
# synthetic corpus

CLASS_COLORS = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 0.5, 0.0],
        [0.5, 0.0, 1.0],
        [0.0, 1.0, 0.5],
        [1.0, 0.0, 0.5],
    ]
)

# one dark tint per class: the spurious cue a pixel-space classifier can
# latch onto; all channels stay <= 0.3 so every tint reads as background
PALETTE_A = (
    (0.05, 0.05, 0.30),
    (0.30, 0.12, 0.05),
    (0.05, 0.25, 0.08),
    (0.22, 0.05, 0.22),
    (0.05, 0.22, 0.22),
    (0.25, 0.25, 0.05),
    (0.15, 0.05, 0.05),
    (0.05, 0.08, 0.15),
    (0.18, 0.12, 0.18),
    (0.10, 0.18, 0.05),
)
PALETTE_B = ((0.92, 0.92, 0.88), (0.88, 0.92, 0.95), (0.95, 0.88, 0.90))


def _disk(n):
    c = (n - 1) / 2.0
    i, j = np.ogrid[:n, :n]
    return (i - c) ** 2 + (j - c) ** 2 <= c**2


def _square(n):
    return np.ones((n, n), dtype=bool)


def _triangle(n):
    i, j = np.ogrid[:n, :n]
    return np.abs(j - (n - 1) / 2.0) <= i / 2.0


def _plus(n):
    t = n // 3
    m = np.zeros((n, n), dtype=bool)
    m[t : n - t, :] = True
    m[:, t : n - t] = True
    return m


def _ring(n):
    c = (n - 1) / 2.0
    i, j = np.ogrid[:n, :n]
    r2 = (i - c) ** 2 + (j - c) ** 2
    return (r2 <= c**2) & (r2 >= (c / 2.0) ** 2)


def _diamond(n):
    c = (n - 1) / 2.0
    i, j = np.ogrid[:n, :n]
    return np.abs(i - c) + np.abs(j - c) <= c


def _hbars(n):
    t = max(n // 3, 1)
    m = np.zeros((n, n), dtype=bool)
    m[:t, :] = True
    m[n - t :, :] = True
    return m


def _frame(n):
    t = max(n // 4, 1)
    m = np.ones((n, n), dtype=bool)
    m[t : n - t, t : n - t] = False
    return m


def _cross(n):
    t = max(n // 4, 2)
    i, j = np.ogrid[:n, :n]
    return (np.abs(i - j) <= t) | (np.abs(i + j - (n - 1)) <= t)


def _tee(n):
    t = max(n // 3, 1)
    m = np.zeros((n, n), dtype=bool)
    m[:t, :] = True
    m[:, (n - t) // 2 : (n + t) // 2] = True
    return m


CLASS_STENCILS = (_disk, _square, _triangle, _plus, _ring, _diamond, _hbars, _frame, _cross, _tee)


def _stripes(n):
    i = np.arange(n)
    return np.broadcast_to((i[:, None] // 2) % 2 == 0, (n, n)).copy()


def _dots(n):
    m = np.zeros((n, n), dtype=bool)
    for i in (0, n - 3):
        for j in (0, n - 3):
            m[i : i + 3, j : j + 3] = True
    return m


def _checker(n):
    i, j = np.ogrid[:n, :n]
    return ((i // 3) + (j // 3)) % 2 == 0


NOVEL_STENCILS = (_stripes, _dots, _checker)


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 10
    side: int = 28
    per_split: int = 200
    shapes_per_class: int = 1
    backgrounds_a: tuple[tuple[float, float, float], ...] = PALETTE_A
    backgrounds_b: tuple[tuple[float, float, float], ...] = PALETTE_B
    noise: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if not (1 <= self.num_classes <= len(CLASS_COLORS)):
            raise ValueError(f"num_classes must lie in 1..{len(CLASS_COLORS)}")
        if self.side < 17 or self.per_split < 1 or self.shapes_per_class < 1:
            raise ValueError("side must be >= 17 and counts >= 1")
        if not (0.0 <= self.noise < 1.0):
            raise ValueError("noise must lie in [0, 1)")
        if not self.backgrounds_a or not self.backgrounds_b:
            raise ValueError("both background palettes must be nonempty")


@dataclass(frozen=True)
class SynthSplit:
    corpus: LabeledCorpus
    masks: tuple[BinaryMap, ...]
    tags: tuple[str, ...]


def _class_size(spec: SynthSpec, y: int, variant: int) -> int:
    # keep at least two pixels of margin so the jittered box stays inside
    return min(11 + 2 * (y % 3) + 2 * variant, spec.side - 4)


def _compose(
    spec: SynthSpec,
    bg: tuple[float, float, float],
    stencil: np.ndarray | None,
    color: np.ndarray | None,
    rng: np.random.Generator,
) -> tuple[RgbImage, BinaryMap]:
    side = spec.side
    img = np.full((side, side, 3), bg, dtype=np.float64)
    mask = np.zeros((side, side), dtype=np.uint8)
    if stencil is not None:
        s = stencil.shape[0]
        top = (side - s) // 2 + int(rng.integers(-1, 2))
        left = (side - s) // 2 + int(rng.integers(-1, 2))
        region = img[top : top + s, left : left + s]
        region[stencil] = color
        mask[top : top + s, left : left + s][stencil] = 1
    if spec.noise > 0:
        img = img + rng.uniform(-spec.noise, spec.noise, img.shape)
    return RgbImage(np.clip(img, 0.0, 1.0)), BinaryMap(mask)


def generate_synthetic(spec: SynthSpec) -> dict[str, SynthSplit]:
    """Three deterministic splits around a spurious background correlation.

    Training-style images pair class y with background palette entry
    y mod |palette|, so a classifier over raw pixels can lean on the
    background. The shifted split keeps the shapes but swaps in the second
    palette; the ood split alternates background-only images (spurious,
    label -1) with novel shapes in class colors (label -1).
    """
    rng = np.random.default_rng(spec.seed)
    out: dict[str, SynthSplit] = {}
    for split, palette in (("in_dist_train", spec.backgrounds_a),
                           ("in_dist_shifted", spec.backgrounds_b)):
        items, masks, tags = [], [], []
        for i in range(spec.per_split):
            y = i % spec.num_classes
            variant = (i // spec.num_classes) % spec.shapes_per_class
            size = _class_size(spec, y, variant)
            stencil = CLASS_STENCILS[y % len(CLASS_STENCILS)](size)
            img, mask = _compose(
                spec, palette[y % len(palette)], stencil, CLASS_COLORS[y], rng
            )
            items.append((img, y))
            masks.append(mask)
            tags.append(f"{split}[{i}]")
        out[split] = SynthSplit(LabeledCorpus(tuple(items)), tuple(masks), tuple(tags))
    items, masks, tags = [], [], []
    for i in range(spec.per_split):
        if i % 2 == 0:
            bg = spec.backgrounds_a[int(rng.integers(len(spec.backgrounds_a)))]
            img, mask = _compose(spec, bg, None, None, rng)
            tag = f"ood[{i}]:spurious"
        else:
            bg = spec.backgrounds_a[int(rng.integers(len(spec.backgrounds_a)))]
            stencil = NOVEL_STENCILS[(i // 2) % len(NOVEL_STENCILS)](13)
            color = CLASS_COLORS[i % spec.num_classes]
            img, mask = _compose(spec, bg, stencil, color, rng)
            tag = f"ood[{i}]:novel"
        items.append((img, -1))
        masks.append(mask)
        tags.append(tag)
    out["ood"] = SynthSplit(LabeledCorpus(tuple(items)), tuple(masks), tuple(tags))
    return out


def fit_template_classifier(corpus: LabeledCorpus) -> LinearClassifier:
    """Nearest-mean-template linear scorer over raw flattened pixels.

    Deliberately naive: whatever correlates with class in pixel space,
    background included, ends up in the weights. This is the plain
    classifier the segmentation-aware detectors are compared against.
    """
    labels = corpus.labels()
    flats = {y: [] for y in labels}
    for x, y in corpus.items:
        flats[y].append(x.flat())
    means = np.stack([np.mean(flats[y], axis=0) for y in labels])
    grand = means.mean(axis=0)
    weights = means - grand
    norms = np.linalg.norm(weights, axis=1, keepdims=True)
    weights = weights / np.maximum(norms, 1e-12)
    return LinearClassifier(weights, np.zeros(len(labels)))


# ---------------------------------------------------------------------------
# experiment driver

@dataclass(frozen=True)
class ExperimentConfig:
    detectors: tuple[str, ...] = ("bls", "ssim-max", "baseline")
    splits: tuple[str, ...] = ("in_dist_shifted", "ood_spurious", "ood_novel")
    synth: SynthSpec = SynthSpec()
    felz: FelzParams = FelzParams()
    center: CenterParams = CenterParams()
    ssim: SsimParams = SsimParams()
    odin: OdinParams = OdinParams()
    sharpness: float = 25.0
    background_floor: float = 0.35
    refset_seed: int = 7
    target_tpr: float = 0.95


@dataclass(frozen=True)
class ExperimentOutput:
    reports: dict[tuple[str, str], EvalReport]
    rows: tuple[tuple[str, str, str, float], ...]  # tag, truth, detector, score


def _ood_subset(split: SynthSplit, want: str) -> tuple[list[int], str]:
    if want == "ood":
        return list(range(len(split.tags))), OOD
    kind = want.removeprefix("ood_")
    return [i for i, t in enumerate(split.tags) if t.endswith(":" + kind)], OOD


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    """Score every sample once per detector and report each requested
    (detector, split) pairing.

    The training-style split anchors every pairing: it is the negative side
    against the shifted split (where flagged samples count as false alarms,
    so the shifted side plays positive) and the positive side against the
    ood splits.
    """
    for d in cfg.detectors:
        if d not in DETECTOR_NAMES:
            raise UnknownDetector(f"unknown detector {d!r}")
    for s in cfg.splits:
        if s not in SPLIT_NAMES:
            raise MissingSplit(f"unknown split {s!r}")
    data = generate_synthetic(cfg.synth)
    train = data["in_dist_train"]
    toy = ToySegmenter(
        CLASS_COLORS[: cfg.synth.num_classes], cfg.sharpness, cfg.background_floor
    )
    need_clf = any(d in ("ods", "baseline", "odin") for d in cfg.detectors)
    clf = fit_template_classifier(train.corpus) if need_clf else None

    def nr(x: RgbImage) -> BinaryMap:
        return n_r(x, cfg.felz, cfg.center)

    refset = (
        build_reference_set(train.corpus, nr, cfg.refset_seed)
        if "ssim-max" in cfg.detectors
        else None
    )

    def scorer(det: str) -> Callable[[RgbImage], float]:
        if det == "bls":
            return lambda x: bls(toy.segment(x)).value
        if det == "ods":
            return lambda x: ods(x, clf, toy, cfg.odin.zeta, cfg.odin.temp).value
        if det == "ssim-max":
            return lambda x: detect_alg3(x, nr, refset, cfg.ssim, 0.0)[1].value
        if det == "baseline":
            return lambda x: baseline_score(x, clf).value
        return lambda x: odin_score(x, clf, cfg.odin).value

    base_needed = ["in_dist_train"]
    for s in cfg.splits:
        base = "in_dist_shifted" if s == "in_dist_shifted" else "ood"
        if base not in base_needed:
            base_needed.append(base)
    rows: list[tuple[str, str, str, float]] = []
    reports: dict[tuple[str, str], EvalReport] = {}
    for det in cfg.detectors:
        fn = scorer(det)
        scores: dict[str, list[float]] = {}
        for base in base_needed:
            split = data[base]
            truth = IN_DIST if base.startswith("in_dist") else OOD
            scores[base] = [fn(x) for x, _ in split.corpus.items]
            rows.extend(
                (tag, truth, det, sc) for tag, sc in zip(split.tags, scores[base])
            )
        for want in cfg.splits:
            if want == "in_dist_shifted":
                pos = [
                    ScoredSample(sc, IN_DIST, tag)
                    for sc, tag in zip(scores[want], data[want].tags)
                ]
                neg = [
                    ScoredSample(sc, OOD, tag)
                    for sc, tag in zip(scores["in_dist_train"], train.tags)
                ]
            else:
                idx, _ = _ood_subset(data["ood"], want)
                pos = [
                    ScoredSample(sc, IN_DIST, tag)
                    for sc, tag in zip(scores["in_dist_train"], train.tags)
                ]
                neg = [
                    ScoredSample(scores["ood"][i], OOD, data["ood"].tags[i])
                    for i in idx
                ]
            reports[(det, want)] = evaluate(pos + neg, cfg.target_tpr)
    return ExperimentOutput(reports, tuple(rows))


def rows_to_csv(rows: Sequence[tuple[str, str, str, float]]) -> str:
    lines = ["tag,truth,detector,score"]
    lines.extend(f"{tag},{truth},{det},{score!r}" for tag, truth, det, score in rows)
    return "\n".join(lines) + "\n"


def report_to_json_dict(det: str, split: str, r: EvalReport) -> dict:
    return {
        "detector": det,
        "split": split,
        "auroc": r.auroc,
        "tnr_at_95tpr": r.tnr_at_95tpr,
        "epsilon": r.epsilon_at_95tpr,
        "roc": [[f, t] for f, t in r.roc],
    }
