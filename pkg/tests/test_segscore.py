"""Foreground scoring against a naive per-pixel oracle."""

import numpy as np
import pytest

from helpers import GOLDEN, random_image, random_segmap
from oidd.errors import ShapeMismatch
from oidd.odinprep import LinearClassifier, OdinParams
from oidd.scores import DetectionScore, ScoreKind
from oidd.segscore import FileSegmapBackend, bls, detect_alg2, ods, v_score
from oidd.tensorio import RgbImage, SegMap
from oidd.toyseg import ToySegmenter


def bls_oracle(m: SegMap) -> float:
    """Double loop straight off the definition."""
    total, count = 0.0, 0
    for i in range(m.height):
        for j in range(m.width):
            q = m.data[i, j]
            k = int(np.argmax(q))
            if k != m.num_classes:
                total += float(q[k])
                count += 1
    return 0.0 if count == 0 else total / count


def test_v_score_cases():
    assert v_score([0.7, 0.2, 0.1]) == 0.7
    assert v_score([0.1, 0.2, 0.7]) == 0.0  # background wins
    assert v_score([0.5, 0.5]) == 0.5  # class beats a tied background
    assert v_score([0.2, 0.5, 0.3]) == 0.5


def test_bls_matches_oracle_small():
    rng = np.random.default_rng(11)
    for _ in range(60):
        m = random_segmap(
            rng, int(rng.integers(1, 12)), int(rng.integers(1, 12)), int(rng.integers(1, 6))
        )
        assert abs(bls(m).value - bls_oracle(m)) < 1e-12


def test_bls_empty_foreground_scores_zero():
    m = np.zeros((3, 3, 4))
    m[:, :, 3] = 0.9
    m[:, :, 0] = 0.1
    score = bls(SegMap(m))
    assert score == DetectionScore(0.0, ScoreKind.BLS)


def test_bls_uniform_foreground_value():
    m = np.zeros((2, 2, 3))
    m[:, :, 0] = 0.8
    m[:, :, 1] = 0.15
    m[:, :, 2] = 0.05
    assert bls(SegMap(m)).value == pytest.approx(0.8, abs=1e-15)


def test_ods_zeta_zero_equals_bls_bitwise():
    rng = np.random.default_rng(12)
    seg = ToySegmenter(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    for _ in range(25):
        x = random_image(rng, 6, 6)
        clf = LinearClassifier(rng.normal(size=(2, 108)), rng.normal(size=2))
        direct = bls(seg.segment(x))
        viaods = ods(x, clf, seg, 0.0, 1000.0)
        assert viaods.value == direct.value
        assert viaods.kind == ScoreKind.ODS


def test_detect_alg2_threshold_semantics():
    seg = ToySegmenter(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), sharpness=50.0)
    x = RgbImage(np.full((4, 4, 3), [1.0, 0.0, 0.0]))
    score = bls(seg.segment(x)).value
    assert detect_alg2(x, seg, ScoreKind.BLS, eps=score) == 0  # strict <
    assert detect_alg2(x, seg, ScoreKind.BLS, eps=min(score + 1e-6, 1.0)) == 1
    assert detect_alg2(x, seg, ScoreKind.BLS, eps=0.0) == 0
    with pytest.raises(ValueError):
        detect_alg2(x, seg, ScoreKind.BLS, eps=1.5)
    with pytest.raises(ValueError):
        detect_alg2(x, seg, ScoreKind.ODS, eps=0.5)  # no classifier
    with pytest.raises(ValueError):
        detect_alg2(x, seg, ScoreKind.BASELINE, eps=0.5)


def test_detect_alg2_ods_path():
    rng = np.random.default_rng(13)
    seg = ToySegmenter(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    x = random_image(rng, 5, 5)
    clf = LinearClassifier(rng.normal(size=(2, 75)), np.zeros(2))
    v = detect_alg2(x, seg, ScoreKind.ODS, 0.5, clf=clf, odin_params=OdinParams())
    assert v in (0, 1)


def test_file_backend_serves_golden_fixture():
    backend = FileSegmapBackend(GOLDEN / "segmap_5x4_n3.oidt", num_classes=3)
    x = RgbImage(np.zeros((5, 4, 3)))
    m = backend.segment(x)
    assert (m.height, m.width, m.num_classes) == (5, 4, 3)
    assert bls(m).value == pytest.approx(bls_oracle(m), abs=1e-12)
    with pytest.raises(ShapeMismatch):
        backend.segment(RgbImage(np.zeros((4, 5, 3))))


def test_detection_score_range():
    with pytest.raises(ValueError):
        DetectionScore(1.2, ScoreKind.BLS)
    with pytest.raises(ValueError):
        DetectionScore(-0.1, ScoreKind.ODS)
