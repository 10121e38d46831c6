"""Reference-set detection: one representative foreground map per class,
matched against a query by windowed structural similarity.

The verdict rule mirrors the other detectors: a query is flagged when even
its best match falls strictly below the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyClass
from .felzseg import CenterParams, FelzParams
from .scores import DetectionScore, ScoreKind
from .ssim import SsimParams, ssim
from .tensorio import (
    BinaryMap,
    RgbImage,
    binary_map_from_tensor,
    binary_map_to_tensor,
    read_tensor,
    write_tensor,
)

NrPipeline = Callable[[RgbImage], BinaryMap]


@dataclass(frozen=True)
class LabeledCorpus:
    """Images with oracle class labels; the sampling pool for references."""

    items: tuple[tuple[RgbImage, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def labels(self) -> list[int]:
        return sorted({y for _, y in self.items})

    def of_class(self, y: int) -> list[RgbImage]:
        return [x for x, label in self.items if label == y]


@dataclass(frozen=True)
class ReferenceSet:
    """One binary foreground map per class, all the same size."""

    entries: tuple[tuple[int, BinaryMap], ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        labels = [y for y, _ in self.entries]
        if not labels:
            raise ValueError("reference set needs at least one entry")
        if len(set(labels)) != len(labels):
            raise ValueError("reference labels must be distinct")
        shapes = {m.data.shape for _, m in self.entries}
        if len(shapes) > 1:
            raise ValueError(f"reference maps differ in shape: {sorted(shapes)}")


def build_reference_set(
    corpus: LabeledCorpus,
    nr: NrPipeline,
    seed: int,
    labels: Sequence[int] | None = None,
) -> ReferenceSet:
    """Sample one image per class uniformly and reduce it to a foreground map.

    Draw order is fixed (labels ascending, one draw each) so the result is a
    pure function of (corpus, seed).
    """
    wanted = sorted(labels) if labels is not None else corpus.labels()
    rng = np.random.default_rng(seed)
    entries = []
    for y in wanted:
        pool = corpus.of_class(y)
        if not pool:
            raise EmptyClass(y)
        pick = pool[int(rng.integers(len(pool)))]
        entries.append((y, nr(pick)))
    return ReferenceSet(tuple(entries), seed)


def detect_alg3(
    t: RgbImage,
    nr: NrPipeline,
    refset: ReferenceSet,
    p: SsimParams,
    eps: float,
) -> tuple[int, DetectionScore, int]:
    """Verdict, best-match score, and nearest class label for an input.

    Score is the maximum SSIM of the query's foreground map against the
    references; ties on the maximum go to the smallest label. Verdict 1
    (OOD) iff the score is strictly below eps.
    """
    if not (0.0 <= eps <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {eps}")
    query = nr(t)
    best = -1.0
    nearest = -1
    for y, rmap in sorted(refset.entries, key=lambda e: e[0]):
        v = ssim(rmap, query, p)
        if v > best:
            best, nearest = v, y
    best = min(best, 1.0)  # guard the score domain against float roundoff
    score = DetectionScore(best, ScoreKind.SSIM_MAX)
    return (1 if score.value < eps else 0), score, nearest


def save_reference_set(
    refset: ReferenceSet,
    out_dir: str | Path,
    ssim_params: SsimParams,
    felz_params: FelzParams,
    center_params: CenterParams,
) -> None:
    """Persist maps as OIDT files plus a JSON manifest of the build inputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "seed": refset.seed,
        "ssim_params": {
            "window": ssim_params.window,
            "k1": ssim_params.k1,
            "k2": ssim_params.k2,
            "dynamic_range": ssim_params.dynamic_range,
        },
        "felz_params": {
            "k": felz_params.k,
            "min_size": felz_params.min_size,
            "smoothing_sigma": felz_params.smoothing_sigma,
            "rho": center_params.rho,
            "drop_border_touching": center_params.drop_border_touching,
        },
        "entries": [],
    }
    for y, m in refset.entries:
        name = f"ref_{y}.oidt"
        write_tensor(out / name, binary_map_to_tensor(m))
        manifest["entries"].append({"label": y, "path": name})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_reference_set(
    in_dir: str | Path,
) -> tuple[ReferenceSet, SsimParams, FelzParams, CenterParams]:
    in_path = Path(in_dir)
    manifest = json.loads((in_path / "manifest.json").read_text())
    entries = []
    for item in manifest["entries"]:
        t = read_tensor(in_path / item["path"])
        entries.append((int(item["label"]), binary_map_from_tensor(t)))
    sp = manifest["ssim_params"]
    fp = manifest["felz_params"]
    return (
        ReferenceSet(tuple(entries), int(manifest["seed"])),
        SsimParams(
            window=int(sp["window"]),
            k1=float(sp["k1"]),
            k2=float(sp["k2"]),
            dynamic_range=float(sp["dynamic_range"]),
        ),
        FelzParams(
            k=float(fp["k"]),
            min_size=int(fp["min_size"]),
            smoothing_sigma=float(fp["smoothing_sigma"]),
        ),
        CenterParams(
            rho=float(fp["rho"]),
            drop_border_touching=bool(fp["drop_border_touching"]),
        ),
    )
