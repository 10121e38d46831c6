"""Shared builders for the test suite."""

from pathlib import Path

import numpy as np

from oidd.tensorio import BinaryMap, RgbImage, SegMap

GOLDEN = Path(__file__).parent / "golden"


def random_image(rng: np.random.Generator, h: int, w: int) -> RgbImage:
    return RgbImage(rng.random((h, w, 3)))


def random_segmap(rng: np.random.Generator, h: int, w: int, n: int) -> SegMap:
    raw = rng.random((h, w, n + 1)) + 1e-3
    return SegMap(raw / raw.sum(axis=2, keepdims=True))


def random_binary_map(rng: np.random.Generator, h: int, w: int) -> BinaryMap:
    return BinaryMap((rng.random((h, w)) < 0.5).astype(np.uint8))
