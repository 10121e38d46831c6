"""Top-level acceptance checks, one test per contract item.

Each test states its tolerance inline and runs against an independent
oracle (double loops, finite differences, exact rational arithmetic, or
exhaustive enumeration), so a pass certifies the optimized routes rather
than re-deriving them.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from helpers import random_binary_map, random_image, random_segmap
from oidd.empdist import DiscreteDistribution, convergence_experiment
from oidd.evalharness import (
    IN_DIST,
    OOD,
    ExperimentConfig,
    ScoredSample,
    auroc,
    auroc_mann_whitney,
    calibrate_epsilon,
    run_experiment,
)
from oidd.felzseg import FelzParams, felzenszwalb
from oidd.odinprep import LinearClassifier, grad_log_maxsoftmax, softmax_t
from oidd.segscore import bls, ods
from oidd.ssim import SsimParams, ssim
from oidd.tensorio import RgbImage, SegMap
from oidd.toyseg import ToySegmenter

# ---------------------------------------------------------------------------
# scoring


def bls_oracle(m: SegMap) -> float:
    h, w, c = m.data.shape
    total, count = 0.0, 0
    for i in range(h):
        for j in range(w):
            q = m.data[i, j]
            best = 0
            for k in range(1, c):
                if q[k] > q[best]:
                    best = k
            if best != c - 1:
                total += float(q[best])
                count += 1
    return total / count if count else 0.0


def test_bls_matches_double_loop_oracle():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    for _ in range(1000):
        h, w = int(rng.integers(1, 33)), int(rng.integers(1, 33))
        n = int(rng.integers(1, 10))
        m = random_segmap(rng, h, w, n)
        assert abs(bls(m).value - bls_oracle(m)) < 1e-6
    assert time.perf_counter() - start < 5.0


def random_classifier(rng, h, w, n):
    return LinearClassifier(rng.normal(size=(n, h * w * 3)), rng.normal(size=n))


def test_perturbation_gradient_matches_finite_differences():
    rng = np.random.default_rng(1002)
    done = 0
    while done < 100:
        h, w = int(rng.integers(3, 9)), int(rng.integers(3, 9))
        n = int(rng.integers(2, 7))
        temp = float(rng.choice([1.0, 10.0, 100.0, 1000.0]))
        img = random_image(rng, h, w)
        clf = random_classifier(rng, h, w, n)
        z = clf.logits(img)
        top2 = np.sort(z)[-2:]
        if top2[1] - top2[0] < 1e-2:
            continue  # keep the argmax stable across the difference step

        def f(flat):
            logits = clf.weights @ flat + clf.bias
            return math.log(float(softmax_t(logits, temp).max()))

        base = img.flat()
        step = 1e-4
        fd = np.empty_like(base)
        for i in range(base.shape[0]):
            hi, lo = base.copy(), base.copy()
            hi[i] += step
            lo[i] -= step
            fd[i] = (f(hi) - f(lo)) / (2 * step)
        analytic = grad_log_maxsoftmax(img, clf, temp)
        rel = np.linalg.norm(analytic - fd) / np.linalg.norm(fd)
        assert rel < 1e-4
        done += 1


def test_perturbed_score_reduces_to_plain_score_without_step():
    rng = np.random.default_rng(1003)
    seg = ToySegmenter(np.eye(3), sharpness=20.0, background_floor=0.3)
    for _ in range(100):
        h, w = int(rng.integers(4, 12)), int(rng.integers(4, 12))
        img = random_image(rng, h, w)
        clf = random_classifier(rng, h, w, int(rng.integers(2, 5)))
        a = ods(img, clf, seg, zeta=0.0, temp=1000.0).value
        b = bls(seg.segment(img)).value
        assert np.float64(a).tobytes() == np.float64(b).tobytes()


# ---------------------------------------------------------------------------
# similarity


def ssim_window_oracle(a, b, p: SsimParams) -> float:
    fa = a.data.astype(np.float64)
    fb = b.data.astype(np.float64)
    n = p.window
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    vals = []
    for i in range(fa.shape[0] - n + 1):
        for j in range(fa.shape[1] - n + 1):
            wa, wb = fa[i : i + n, j : j + n], fb[i : i + n, j : j + n]
            mu_a, mu_b = wa.mean(), wb.mean()
            va = ((wa - mu_a) ** 2).mean()
            vb = ((wb - mu_b) ** 2).mean()
            cov = ((wa - mu_a) * (wb - mu_b)).mean()
            lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
            con = (2 * cov + c2) / (va + vb + c2)
            vals.append(max(lum * con, 0.0))
    return math.fsum(vals) / len(vals)


def test_similarity_identity_symmetry_oracle_and_range():
    rng = np.random.default_rng(1004)
    p = SsimParams()
    for _ in range(200):
        h, w = int(rng.integers(11, 33)), int(rng.integers(11, 33))
        a = random_binary_map(rng, h, w)
        b = random_binary_map(rng, h, w)
        assert abs(ssim(a, a, p) - 1.0) <= 1e-9
        assert ssim(a, b, p) == ssim(b, a, p)
        v = ssim(a, b, p)
        assert abs(v - ssim_window_oracle(a, b, p)) < 1e-9
        assert 0.0 <= v <= 1.0 + 1e-9


# ---------------------------------------------------------------------------
# segmentation structure


def test_graph_segmentation_structural_contract():
    rng = np.random.default_rng(1005)
    # uniform image collapses to a single segment
    uniform = RgbImage(np.full((16, 16, 3), 0.3))
    assert felzenszwalb(uniform, FelzParams()).num_segments == 1
    # a two-tone image splits into exactly its two regions
    two = np.zeros((10, 10, 3))
    two[:, 5:] = 1.0
    s = felzenszwalb(RgbImage(two), FelzParams(k=0.05, min_size=1))
    assert s.num_segments == 2
    # growing k never increases the segment count
    img = RgbImage(rng.integers(0, 5, (18, 18, 3)) / 4.0)
    counts = [
        felzenszwalb(img, FelzParams(k=k, min_size=1)).num_segments
        for k in (0.02, 0.1, 0.5, 2.0, 50.0)
    ]
    assert counts == sorted(counts, reverse=True)
    # byte-equal determinism across repeated runs
    r1 = felzenszwalb(img, FelzParams(k=0.1))
    r2 = felzenszwalb(img, FelzParams(k=0.1))
    assert r1.labels.tobytes() == r2.labels.tobytes()
    # every final segment respects the size floor
    for ms in (1, 4, 7):
        out = felzenszwalb(img, FelzParams(k=0.05, min_size=ms))
        assert np.bincount(out.labels.ravel()).min() >= ms


# ---------------------------------------------------------------------------
# ranking metrics


def mw_fraction(pos, neg) -> Fraction:
    g = sum(1 for p in pos for q in neg if p > q)
    e = sum(1 for p in pos for q in neg if p == q)
    return Fraction(2 * g + e, 2 * len(pos) * len(neg))


def as_samples(pos, neg):
    return [ScoredSample(s, IN_DIST) for s in pos] + [
        ScoredSample(s, OOD) for s in neg
    ]


def test_ranking_metric_routes_agree_with_exact_arithmetic():
    hand = as_samples([0.9, 0.8, 0.4], [0.7, 0.3])
    assert auroc(hand) == 5 / 6
    assert auroc_mann_whitney(hand) == 5 / 6
    rng = np.random.default_rng(1006)
    for _ in range(1000):
        pos = list(rng.integers(0, 5, int(rng.integers(1, 12))) / 4.0)
        neg = list(rng.integers(0, 5, int(rng.integers(1, 12))) / 4.0)
        samples = as_samples(pos, neg)
        a = auroc(samples)
        assert a == auroc_mann_whitney(samples)  # exact, both routes
        # negating every score complements the area, exactly in rationals
        flipped = as_samples([-s for s in pos], [-s for s in neg])
        assert auroc(flipped) == float(1 - mw_fraction(pos, neg))


# ---------------------------------------------------------------------------
# convergence experiment


def test_empirical_distance_converges_and_decreases():
    weights = np.arange(1, 11)
    target = DiscreteDistribution(
        tuple(f"atom{i}" for i in range(10)),
        tuple(float(w) / float(weights.sum()) for w in weights),
    )
    start = time.perf_counter()
    final_ok = 0
    decreasing = 0
    for rep in range(100):
        # the triangle-inequality chain is re-asserted inside every run
        report = convergence_experiment(
            target, target, [100, 1_000, 10_000], seed=[1007, rep]
        )
        d1, d2, d3 = report.distances
        final_ok += int(d3 < 0.03)
        decreasing += int(d1 > d2 > d3)
    assert time.perf_counter() - start < 30.0
    assert final_ok >= 99
    assert decreasing >= 95


# ---------------------------------------------------------------------------
# desk-scale experiment


@pytest.fixture(scope="module")
def desk_scale():
    start = time.perf_counter()
    out = run_experiment(ExperimentConfig())
    return out, time.perf_counter() - start


def test_desk_scale_a_no_false_separation_on_shifted_background(desk_scale):
    out, _ = desk_scale
    assert out.reports[("bls", "in_dist_shifted")].auroc <= 0.55


def test_desk_scale_b_flags_background_only_inputs(desk_scale):
    out, _ = desk_scale
    assert out.reports[("bls", "ood_spurious")].auroc >= 0.95


def test_desk_scale_c_reference_match_flags_novel_shapes(desk_scale):
    out, _ = desk_scale
    assert out.reports[("ssim-max", "ood_novel")].auroc >= 0.90


def test_desk_scale_d_pixel_classifier_strictly_weaker_on_spurious(desk_scale):
    out, _ = desk_scale
    assert (
        out.reports[("baseline", "ood_spurious")].auroc
        < out.reports[("bls", "ood_spurious")].auroc
    )


def test_desk_scale_runtime_under_two_minutes(desk_scale):
    _, elapsed = desk_scale
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# calibration contract


def enumerate_epsilon(scores, target):
    n = len(scores)
    for eps in sorted(set(scores), reverse=True):
        if sum(1 for s in scores if s >= eps) / n >= target:
            return eps
    raise AssertionError("unreachable")


def test_calibration_meets_target_exactly_as_enumerated(desk_scale):
    out, _ = desk_scale
    scores = [
        sc
        for tag, _, det, sc in out.rows
        if det == "bls" and tag.startswith("in_dist_shifted")
    ]
    eps = calibrate_epsilon(scores, 0.95)
    assert eps == enumerate_epsilon(scores, 0.95)
    assert sum(1 for s in scores if s >= eps) / len(scores) >= 0.95
    rng = np.random.default_rng(1008)
    for _ in range(200):
        cal = list(rng.integers(0, 6, int(rng.integers(1, 25))) / 5.0)
        eps = calibrate_epsilon(cal, 0.95)
        assert eps == enumerate_epsilon(cal, 0.95)
        assert sum(1 for s in cal if s >= eps) / len(cal) >= 0.95
