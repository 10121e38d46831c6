"""Reference-set construction and nearest-reference detection."""

import numpy as np
import pytest

from helpers import random_binary_map
from oidd.errors import EmptyClass
from oidd.felzseg import CenterParams, FelzParams
from oidd.refdetect import (
    LabeledCorpus,
    ReferenceSet,
    build_reference_set,
    detect_alg3,
    load_reference_set,
    save_reference_set,
)
from oidd.scores import ScoreKind
from oidd.ssim import SsimParams
from oidd.tensorio import BinaryMap, RgbImage


def shape_image(side, top, left, size, color):
    img = np.zeros((side, side, 3))
    img[top : top + size, left : left + size] = color
    return RgbImage(img)


def shape_mask(side, top, left, size):
    m = np.zeros((side, side), dtype=np.uint8)
    m[top : top + size, left : left + size] = 1
    return BinaryMap(m)


# identity-friendly pipeline: segment by "any channel lit"
def lit_nr(t: RgbImage) -> BinaryMap:
    return BinaryMap((t.data.sum(axis=2) > 0).astype(np.uint8))


def toy_corpus(side=15):
    # square size varies by class so the masks are distinctive
    items = []
    for y, color in enumerate(([1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0])):
        for off in (4, 5, 6):
            items.append((shape_image(side, off, off, 3 + 2 * y, color), y))
    return LabeledCorpus(tuple(items))


def test_build_is_deterministic():
    corpus = toy_corpus()
    a = build_reference_set(corpus, lit_nr, seed=7)
    b = build_reference_set(corpus, lit_nr, seed=7)
    assert a.seed == b.seed == 7
    assert [y for y, _ in a.entries] == [0, 1, 2]
    for (ya, ma), (yb, mb) in zip(a.entries, b.entries):
        assert ya == yb
        assert ma.data.tobytes() == mb.data.tobytes()


def test_build_draws_one_uniform_pick_per_class():
    corpus = toy_corpus()
    refset = build_reference_set(corpus, lit_nr, seed=7)
    # replay the documented draw order by hand
    rng = np.random.default_rng(7)
    for y, m in refset.entries:
        pool = corpus.of_class(y)
        pick = pool[int(rng.integers(len(pool)))]
        assert m.data.tobytes() == lit_nr(pick).data.tobytes()


def test_singleton_corpus():
    img = shape_image(15, 5, 5, 5, [1.0, 0, 0])
    refset = build_reference_set(LabeledCorpus(((img, 3),)), lit_nr, seed=0)
    assert [y for y, _ in refset.entries] == [3]
    np.testing.assert_array_equal(refset.entries[0][1].data, lit_nr(img).data)


def test_requested_label_missing_from_corpus():
    with pytest.raises(EmptyClass):
        build_reference_set(toy_corpus(), lit_nr, seed=0, labels=[0, 9])


def test_labels_subset_restricts_entries():
    refset = build_reference_set(toy_corpus(), lit_nr, seed=7, labels=[2, 0])
    assert [y for y, _ in refset.entries] == [0, 2]


def test_query_equal_to_reference_scores_one():
    corpus = toy_corpus()
    refset = build_reference_set(corpus, lit_nr, seed=7)
    for y, m in refset.entries:
        # reconstruct an image whose map is exactly this reference
        img = RgbImage(m.data[:, :, None].astype(np.float64).repeat(3, axis=2))
        verdict, score, nearest = detect_alg3(img, lit_nr, refset, SsimParams(), eps=0.5)
        assert verdict == 0
        assert score.value == 1.0
        assert score.kind is ScoreKind.SSIM_MAX
        assert nearest == y


def test_tie_goes_to_smallest_label():
    m = random_binary_map(np.random.default_rng(40), 12, 12)
    refset = ReferenceSet(((4, m), (1, m), (9, m)), seed=0)
    img = RgbImage(m.data[:, :, None].astype(np.float64).repeat(3, axis=2))
    _, score, nearest = detect_alg3(img, lit_nr, refset, SsimParams(), eps=0.0)
    assert score.value == 1.0
    assert nearest == 1


def test_entry_order_does_not_matter():
    rng = np.random.default_rng(41)
    maps = [random_binary_map(rng, 12, 12) for _ in range(3)]
    query = shape_image(12, 3, 3, 5, [1.0, 1.0, 0.0])
    fwd = ReferenceSet(tuple(enumerate(maps)), seed=0)
    rev = ReferenceSet(tuple(reversed(list(enumerate(maps)))), seed=0)
    assert (
        detect_alg3(query, lit_nr, fwd, SsimParams(), eps=0.5)
        == detect_alg3(query, lit_nr, rev, SsimParams(), eps=0.5)
    )


def test_verdict_monotone_in_threshold():
    corpus = toy_corpus()
    refset = build_reference_set(corpus, lit_nr, seed=7)
    query = shape_image(15, 3, 8, 4, [1.0, 0, 1.0])
    verdicts = [
        detect_alg3(query, lit_nr, refset, SsimParams(), eps=e)[0]
        for e in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    ]
    assert verdicts == sorted(verdicts)  # once OOD, stays OOD as eps grows


def test_zero_threshold_never_flags():
    refset = build_reference_set(toy_corpus(), lit_nr, seed=7)
    query = shape_image(15, 1, 1, 3, [0.3, 0.3, 0.3])
    verdict, score, _ = detect_alg3(query, lit_nr, refset, SsimParams(), eps=0.0)
    assert verdict == 0
    assert score.value >= 0.0


def test_threshold_domain_checked():
    refset = build_reference_set(toy_corpus(), lit_nr, seed=7)
    query = shape_image(15, 5, 5, 5, [1.0, 0, 0])
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError):
            detect_alg3(query, lit_nr, refset, SsimParams(), bad)


def test_refset_validation():
    rng = np.random.default_rng(42)
    m = random_binary_map(rng, 8, 8)
    with pytest.raises(ValueError):
        ReferenceSet((), seed=0)
    with pytest.raises(ValueError):
        ReferenceSet(((1, m), (1, m)), seed=0)
    with pytest.raises(ValueError):
        ReferenceSet(((1, m), (2, random_binary_map(rng, 8, 9))), seed=0)


def test_rebuild_matches_frozen_fixture(tmp_path):
    # pins the draw order and the segmentation pipeline to checked-in bytes
    from helpers import GOLDEN
    from oidd.evalharness import SynthSpec, generate_synthetic
    from oidd.felzseg import n_r

    spec = SynthSpec(num_classes=3, side=20, per_split=12, noise=0.02, seed=5)
    train = generate_synthetic(spec)["in_dist_train"]
    fp, cp, sp = FelzParams(), CenterParams(), SsimParams()
    refset = build_reference_set(train.corpus, lambda x: n_r(x, fp, cp), seed=7)
    save_reference_set(refset, tmp_path / "refs", sp, fp, cp)
    frozen = GOLDEN / "refset_small"
    for name in ("manifest.json", "ref_0.oidt", "ref_1.oidt", "ref_2.oidt"):
        assert (tmp_path / "refs" / name).read_bytes() == (frozen / name).read_bytes()


def test_save_load_round_trip(tmp_path):
    refset = build_reference_set(toy_corpus(), lit_nr, seed=7)
    sp = SsimParams(window=5, k1=0.02)
    fp = FelzParams(k=80.0, min_size=3, smoothing_sigma=0.4)
    cp = CenterParams(rho=0.5, drop_border_touching=False)
    save_reference_set(refset, tmp_path / "refs", sp, fp, cp)
    loaded, sp2, fp2, cp2 = load_reference_set(tmp_path / "refs")
    assert (sp2, fp2, cp2) == (sp, fp, cp)
    assert loaded.seed == refset.seed
    assert [y for y, _ in loaded.entries] == [y for y, _ in refset.entries]
    for (_, ma), (_, mb) in zip(loaded.entries, refset.entries):
        assert ma.data.tobytes() == mb.data.tobytes()
