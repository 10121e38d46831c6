"""Expert-guided two-step segmentation: Felzenszwalb graph partitioning
followed by center-based background removal and binarization.

The graph variant is pinned down exactly so outputs are reproducible across
platforms: 8-connected pixel grid, Euclidean RGB edge weights, edges
processed in ascending weight with ties broken by construction order
(row-major source pixel, neighbor directions E, S, SE, SW), merge
threshold tau(C) = k / |C|, and a post-pass that folds every segment
smaller than min_size into the neighbor reached by its cheapest edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensorio import BinaryMap, RgbImage


@dataclass(frozen=True)
class FelzParams:
    k: float = 100.0
    min_size: int = 5
    smoothing_sigma: float = 0.0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("scale-of-observation k must be > 0")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")
        if self.smoothing_sigma < 0:
            raise ValueError("smoothing_sigma must be >= 0")


@dataclass(frozen=True)
class CenterParams:
    rho: float = 0.6
    drop_border_touching: bool = True

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("central-box fraction rho must lie in (0, 1]")


@dataclass(frozen=True)
class SegmentLabeling:
    """Dense 0-based segment ids per pixel; every id occurs at least once."""

    labels: np.ndarray
    num_segments: int

    def __post_init__(self):
        a = np.asarray(self.labels, dtype=np.int32)
        object.__setattr__(self, "labels", a)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


class _UnionFind:
    """Array-based disjoint sets with path compression and size tracking."""

    __slots__ = ("parent", "size", "count")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        """Merge roots a and b; returns the surviving root."""
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.count -= 1
        return a


def _grid_edges(img: np.ndarray) -> list[tuple[float, int, int]]:
    """(weight, src, dst) triples in the pinned construction order."""
    h, w = img.shape[:2]
    # per-direction weight planes, vectorized; assembly order stays exact
    d_e = np.sqrt(((img[:, :-1] - img[:, 1:]) ** 2).sum(axis=2)) if w > 1 else None
    d_s = np.sqrt(((img[:-1, :] - img[1:, :]) ** 2).sum(axis=2)) if h > 1 else None
    d_se = (
        np.sqrt(((img[:-1, :-1] - img[1:, 1:]) ** 2).sum(axis=2))
        if h > 1 and w > 1
        else None
    )
    d_sw = (
        np.sqrt(((img[:-1, 1:] - img[1:, :-1]) ** 2).sum(axis=2))
        if h > 1 and w > 1
        else None
    )
    edges: list[tuple[float, int, int]] = []
    for i in range(h):
        base = i * w
        for j in range(w):
            src = base + j
            if j + 1 < w:
                edges.append((float(d_e[i, j]), src, src + 1))
            if i + 1 < h:
                edges.append((float(d_s[i, j]), src, src + w))
                if j + 1 < w:
                    edges.append((float(d_se[i, j]), src, src + w + 1))
                if j >= 1:
                    edges.append((float(d_sw[i, j - 1]), src, src + w - 1))
    return edges


def felzenszwalb(x: RgbImage, p: FelzParams) -> SegmentLabeling:
    """Graph-based segmentation with merge threshold tau(C) = k / |C|.

    Deterministic: the stable ascending sort over the fixed construction
    order makes equal-weight edges platform-independent.
    """
    h, w = x.height, x.width
    n = h * w
    edges = sorted(_grid_edges(x.data), key=lambda e: e[0])
    uf = _UnionFind(n)
    # threshold[root] = Int(C) + k / |C|; singletons have Int = 0
    threshold = [p.k] * n
    for weight, a, b in edges:
        ra, rb = uf.find(a), uf.find(b)
        if ra != rb and weight <= threshold[ra] and weight <= threshold[rb]:
            r = uf.union(ra, rb)
            threshold[r] = weight + p.k / uf.size[r]
    if p.min_size > 1:
        # ascending order means the first edge out of a too-small segment is
        # its cheapest connection, i.e. its most similar neighbor
        for weight, a, b in edges:
            ra, rb = uf.find(a), uf.find(b)
            if ra != rb and (uf.size[ra] < p.min_size or uf.size[rb] < p.min_size):
                uf.union(ra, rb)
    labels = np.empty((h, w), dtype=np.int32)
    ids: dict[int, int] = {}
    for i in range(h):
        for j in range(w):
            root = uf.find(i * w + j)
            if root not in ids:
                ids[root] = len(ids)
            labels[i, j] = ids[root]
    return SegmentLabeling(labels, len(ids))


def remove_background(s: SegmentLabeling, c: CenterParams) -> BinaryMap:
    """Keep segments whose pixel centroid lies in the closed centered box of
    side fractions rho*h x rho*w and (optionally) that avoid the border.

    An all-background result is legal and yields the all-zero map.
    """
    h, w = s.height, s.width
    flat = s.labels.ravel()
    counts = np.bincount(flat, minlength=s.num_segments).astype(np.float64)
    rows = np.repeat(np.arange(h, dtype=np.float64), w)
    cols = np.tile(np.arange(w, dtype=np.float64), h)
    cr = np.bincount(flat, weights=rows, minlength=s.num_segments) / counts
    cc = np.bincount(flat, weights=cols, minlength=s.num_segments) / counts
    keep = (np.abs(cr - (h - 1) / 2.0) <= c.rho * h / 2.0) & (
        np.abs(cc - (w - 1) / 2.0) <= c.rho * w / 2.0
    )
    if c.drop_border_touching:
        border = np.zeros(s.num_segments, dtype=bool)
        border[np.unique(s.labels[0, :])] = True
        border[np.unique(s.labels[-1, :])] = True
        border[np.unique(s.labels[:, 0])] = True
        border[np.unique(s.labels[:, -1])] = True
        keep &= ~border
    return BinaryMap(keep[s.labels].astype(np.uint8))


def gaussian_smooth(x: RgbImage, sigma: float) -> RgbImage:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), edge-clamped."""
    if sigma <= 0:
        return x
    radius = int(np.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(t**2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    padded = np.pad(x.data, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    out = np.empty_like(padded)
    for ch in range(3):
        out[:, :, ch] = np.apply_along_axis(
            lambda r: np.convolve(r, kernel, mode="same"), 1, padded[:, :, ch]
        )
        out[:, :, ch] = np.apply_along_axis(
            lambda col: np.convolve(col, kernel, mode="same"), 0, out[:, :, ch]
        )
    trimmed = out[radius:-radius, radius:-radius, :]
    return RgbImage(np.clip(trimmed, 0.0, 1.0))


def n_r(x: RgbImage, p: FelzParams, c: CenterParams) -> BinaryMap:
    """The full expert-guided pipeline: smooth, partition, drop background."""
    if p.smoothing_sigma > 0:
        x = gaussian_smooth(x, p.smoothing_sigma)
    return remove_background(felzenszwalb(x, p), c)
