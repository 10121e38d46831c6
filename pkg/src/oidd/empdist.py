"""Finite discrete distributions over opaque atoms, the sup-norm distance
between them, and a Monte Carlo check that empirical estimates converge to
within a configured corruption bound.

Atoms are arbitrary hashable values; in the pipeline they are canonical
byte encodings of binary foreground maps, with the empty image as an
ordinary atom. The corrupted sampling distribution stands in for an
imperfect extractor whose true error is unobservable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import EmptySample

SUM_TOL = 1e-9

# sentinel atom for the empty image
BOTTOM: Hashable = "<bottom>"


@dataclass(frozen=True)
class DiscreteDistribution:
    support: tuple[Hashable, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs must align")
        if len(set(self.support)) != len(self.support):
            raise ValueError("atoms must be distinct")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        total = sum(self.probs)
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")

    def prob(self, atom: Hashable) -> float:
        for a, p in zip(self.support, self.probs):
            if a == atom:
                return p
        return 0.0


@dataclass(frozen=True)
class ConvergenceReport:
    sizes: tuple[int, ...]
    distances: tuple[float, ...]
    delta_bound: float

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        if len(self.sizes) != len(self.distances):
            raise ValueError("sizes and distances must align")


def empirical(samples: Sequence[Hashable]) -> DiscreteDistribution:
    """Counting measure of a sample list, support in first-seen order."""
    if len(samples) == 0:
        raise EmptySample("cannot form an empirical distribution of nothing")
    counts: dict[Hashable, int] = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    n = len(samples)
    atoms = tuple(counts)
    return DiscreteDistribution(atoms, tuple(counts[a] / n for a in atoms))


def d_k(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Largest pointwise probability gap over the union of supports.

    Atoms missing from one side contribute their full mass on the other.
    """
    atoms = set(p.support) | set(q.support)
    pm = dict(zip(p.support, p.probs))
    qm = dict(zip(q.support, q.probs))
    return max(abs(pm.get(a, 0.0) - qm.get(a, 0.0)) for a in atoms)


def corrupted(
    target: DiscreteDistribution, delta: float, sink: Hashable = BOTTOM
) -> DiscreteDistribution:
    """A distribution at sup-distance exactly delta from the target.

    Moves delta of mass from the heaviest atom onto `sink` (added to the
    support if absent), so the gap is delta at those two atoms and zero
    elsewhere.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return target
    heavy = max(range(len(target.probs)), key=lambda i: (target.probs[i], -i))
    if target.support[heavy] == sink:
        raise ValueError("sink atom must differ from the heaviest atom")
    if delta > target.probs[heavy]:
        raise ValueError("delta exceeds the largest atom mass")
    atoms = list(target.support)
    probs = list(target.probs)
    probs[heavy] -= delta
    if sink in atoms:
        probs[atoms.index(sink)] += delta
    else:
        atoms.append(sink)
        probs.append(delta)
    return DiscreteDistribution(tuple(atoms), tuple(probs))


def sample_atoms(
    dist: DiscreteDistribution, n: int, rng: np.random.Generator
) -> list[Hashable]:
    weights = np.asarray(dist.probs, dtype=np.float64)
    idx = rng.choice(len(dist.support), size=n, p=weights / weights.sum())
    return [dist.support[i] for i in idx]


def convergence_experiment(
    target: DiscreteDistribution,
    sampling: DiscreteDistribution,
    sizes: Sequence[int],
    seed: int | Sequence[int],
    delta_bound: float = 0.0,
) -> ConvergenceReport:
    """Empirical sup-distance to the target at increasing sample sizes.

    Draws come from `sampling` (the corrupted stand-in for the extractor
    output); every run re-checks the chain
        d(emp, target) <= d(emp, sampling) + d(sampling, target)
    that the asymptotic bound rests on. Per-size streams are spawned from
    the seed, so callers may run repetitions concurrently with composite
    seeds like [master, repetition] and get schedule-independent results.
    """
    if list(sizes) != sorted(sizes) or any(n < 1 for n in sizes):
        raise ValueError("sizes must be ascending positive integers")
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    distances = []
    for i, n in enumerate(sizes):
        rng = np.random.default_rng(streams[i])
        emp = empirical(sample_atoms(sampling, n, rng))
        d = d_k(emp, target)
        chain = d_k(emp, sampling) + d_k(sampling, target)
        if d > chain + 1e-12:
            raise AssertionError(
                f"triangle inequality violated: {d!r} > {chain!r}"
            )
        distances.append(d)
    return ConvergenceReport(tuple(sizes), tuple(distances), delta_bound)


def report_to_csv(report: ConvergenceReport) -> str:
    out = io.StringIO()
    out.write("n,d_k,delta_bound\n")
    for n, d in zip(report.sizes, report.distances):
        out.write(f"{n},{d!r},{report.delta_bound!r}\n")
    return out.getvalue()
