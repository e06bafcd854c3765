"""Empirical checks of the limit statements: shapes, coexistence, walk displacement."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .engine import Snapshot, Trajectory, run, snapshot
from .lattice import ScaledSet, SiteSet, hausdorff, symmetry_defect
from .randomfield import RandomField, direction_table, walk_indices
from .scenario import Mode, Scenario


@dataclass(frozen=True)
class ShapeEstimate:
    scaled: ScaledSet
    inner_radius: float
    outer_radius: float
    sym_defect: float | None

    def to_dict(self) -> dict:
        return {"n": self.scaled.scale, "sites": len(self.scaled), "inner_radius": self.inner_radius,
                "outer_radius": self.outer_radius, "sym_defect": self.sym_defect}


def _radii(sites: SiteSet) -> tuple[int, int]:
    """(largest m with every lattice point of norm <= m inside, max norm)."""
    pts = sites.points
    norms = np.abs(pts).sum(axis=1)
    lo = np.minimum(pts.min(axis=0), 0) - 1
    hi = np.maximum(pts.max(axis=0), 0) + 1
    present = np.zeros(tuple(hi - lo + 1), dtype=bool)
    present[tuple((pts - lo).T)] = True
    axes = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij", sparse=True)
    box_norm = sum(np.abs(a) for a in axes)
    # The box holds the origin and a ring outside the set, so the nearest
    # missing point to the origin lies inside it.
    missing_min = int(np.min(np.where(present, np.iinfo(np.int64).max, box_norm)))
    return missing_min - 1, int(norms.max())


def shape_estimate(snap: Snapshot | tuple[SiteSet, int], symmetry: bool = True) -> ShapeEstimate:
    """Scaled discovered set with inner/outer L1 radii and symmetry defect."""
    sites, n = (snap.sites, snap.t) if isinstance(snap, Snapshot) else snap
    if n < 1:
        raise ValueError("shape estimates need n >= 1")
    if not len(sites):
        raise ValueError("empty snapshot")
    inner, outer = _radii(sites)
    scaled = ScaledSet(sites, n)
    sym = symmetry_defect(scaled) if symmetry else None
    return ShapeEstimate(scaled, max(inner, 0) / n, outer / n, sym)


def compare_shapes(a: ShapeEstimate, b: ShapeEstimate) -> float:
    return hausdorff(a.scaled, b.scaled)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    lo, hi = proportion_confint(successes, trials, alpha=1 - level, method="wilson")
    return float(lo), float(hi)


@dataclass(frozen=True)
class CoexistenceStat:
    K: int
    T: int
    counts: tuple[tuple[int, int], ...]
    coexists: tuple[bool, ...]

    @property
    def replicas(self) -> int:
        return len(self.counts)

    @property
    def frequency(self) -> float:
        return sum(self.coexists) / len(self.coexists) if self.coexists else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(sum(self.coexists), len(self.coexists))

    def to_dict(self) -> dict:
        lo, hi = self.interval
        return {"K": self.K, "T": self.T, "replicas": self.replicas, "frequency": self.frequency,
                "wilson_95": [lo, hi], "counts": [list(c) for c in self.counts],
                "coexists": list(self.coexists)}


def recruited_counts(tr: Trajectory | Snapshot, T: int | None = None) -> tuple[int, int]:
    """Particles activated after time 0 by each type, up to time ``T``."""
    if isinstance(tr, Snapshot):
        return tr.recruited
    return snapshot(tr.state, T, digest=False).recruited


def coexistence_stat(replicas: Sequence[Trajectory | Snapshot | tuple[int, int]], K: int,
                     T: int) -> CoexistenceStat:
    """Coexistence proxy: both types recruit at least ``K`` particles by time ``T``.

    Replicas are given in replica-id order; counts are taken as-is when a
    ``(count1, count2)`` pair is passed.
    """
    if K < 1:
        raise ValueError("activation threshold K must be at least 1")
    counts = []
    for r in replicas:
        c = tuple(int(x) for x in r) if isinstance(r, tuple) else recruited_counts(r, T)
        counts.append(c)
    flags = tuple(c1 >= K and c2 >= K for c1, c2 in counts)
    return CoexistenceStat(K, T, tuple(counts), flags)


def run_coexistence(scenario: Scenario, replicas: int, seed_base: int, K: int = 50,
                    T: int | None = None) -> CoexistenceStat:
    """Replica ``i`` runs with seed ``seed_base + i``."""
    if scenario.mode is not Mode.TWO_TYPE:
        raise ValueError("coexistence needs a two-type scenario")
    if replicas < 1:
        raise ValueError("replica count must be at least 1")
    T = scenario.horizon if T is None else T
    sc = replace(scenario, horizon=T)
    counts = []
    for i in range(replicas):
        seed = seed_base + i
        tr = run(sc.with_seed(seed), RandomField(seed))
        counts.append(recruited_counts(tr, T))
    return coexistence_stat(counts, K, T)


def mod_dev_check(f: RandomField, alpha: float, n: int, trials: int, d: int = 2,
                  chunk: int = 1024) -> float:
    """Fraction of ``trials`` independent ``n``-step walks ending outside the L1 ball of radius n**alpha.

    Walk ``i`` is the walk of particle ``(origin, i + 1)``.
    """
    if not 0.5 < alpha < 1:
        raise ValueError("alpha must lie in (1/2, 1)")
    if n < 1:
        raise ValueError("n must be at least 1")
    origin = np.zeros((trials, d), dtype=np.int64)
    prefix = f.prefix(origin, np.arange(1, trials + 1))
    table = direction_table(d)
    pos = np.zeros((trials, d), dtype=np.int64)
    for s0 in range(0, n, chunk):
        steps = np.arange(s0, min(n, s0 + chunk))
        idx = walk_indices(np.repeat(prefix, len(steps)), np.tile(steps, trials), d)
        pos += table[idx].reshape(trials, len(steps), d).sum(axis=1)
    return float(np.mean(np.abs(pos).sum(axis=1) > n ** alpha))


@dataclass(frozen=True)
class Lifetimes:
    lifetimes: np.ndarray
    histogram: np.ndarray
    staleness: float
    horizon: int

    def to_rows(self) -> list[tuple[int, int]]:
        return [(i, int(c)) for i, c in enumerate(self.histogram) if c]


def discovery_lifetimes(tr: Trajectory) -> Lifetimes:
    """Per-particle (last discovery - activation) and the staleness indicator.

    A particle that never finds a new site has lifetime 0.  Staleness is the
    fraction of particles activated in the first half of the run whose last
    discovery falls in the final quarter; particles activated late are still
    at the front and say nothing about finiteness.
    """
    P = tr.state.particles
    T = tr.state.clock
    last = P.last_discovery
    life = np.where(last >= 0, last - P.activated_at, 0)
    hist = np.bincount(life) if len(life) else np.zeros(0, dtype=np.int64)
    early = P.activated_at <= T / 2
    stale = float(np.mean(last[early] > 3 * T / 4)) if early.any() else 0.0
    return Lifetimes(life, hist, stale, T)


def median_shape_distance(s_a: Scenario, s_b: Scenario, ns: Iterable[int], seed_pairs: Iterable[tuple[int, int]]) -> dict[int, float]:
    """Median Hausdorff distance between the scaled shapes of two scenarios at each ``n``."""
    ns = sorted(ns)
    dists: dict[int, list[float]] = {n: [] for n in ns}
    horizon = ns[-1]
    for seed_a, seed_b in seed_pairs:
        ta = run(replace(s_a, horizon=horizon, seed=seed_a), RandomField(seed_a), ns)
        tb = run(replace(s_b, horizon=horizon, seed=seed_b), RandomField(seed_b), ns)
        for sa, sb in zip(ta.snapshots, tb.snapshots):
            est_a = shape_estimate(sa, symmetry=False)
            est_b = shape_estimate(sb, symmetry=False)
            dists[sa.t].append(compare_shapes(est_a, est_b))
    return {n: float(np.median(v)) for n, v in dists.items()}
