"""Pairs of processes on shared keyed randomness, with pathwise inclusions checked at runtime."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .engine import EngineState, initial_state, step
from .lattice import SiteSet, difference, encode, unique_rows
from .randomfield import RandomField, audit_locality, make_coupled_pair
from .scenario import InitEntry, InitialConfig, Mode, Scenario, Tag


class CouplingError(ValueError):
    pass


@dataclass
class CoupledRun:
    sharing: str
    proc_a: EngineState
    proc_b: EngineState
    violations: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    steps_checked: int = 0
    equal: bool | None = None
    N_sigma: int | None = None
    N: int | None = None
    trusted: bool | None = None
    inconclusive_reason: str | None = None
    guard_fraction: float | None = None
    audit_mismatches: int | None = None

    def report(self) -> dict:
        out = {
            "sharing": self.sharing,
            "N_sigma": self.N_sigma,
            "N": self.N,
            "trusted": self.trusted,
            "violations": [[t, list(site)] for t, site in self.violations],
            "steps_checked": self.steps_checked,
        }
        if self.equal is not None:
            out["equal"] = self.equal
        if self.inconclusive_reason is not None:
            out["inconclusive"] = self.inconclusive_reason
        if self.guard_fraction is not None:
            out["guard_fraction"] = self.guard_fraction
        if self.audit_mismatches is not None:
            out["audit_mismatches"] = self.audit_mismatches
        return out


def discovery_time_at(st: EngineState, sites: np.ndarray) -> np.ndarray:
    """Discovery time of each site in ``st`` (-1 if undiscovered or never materialized)."""
    g = st.grid
    out = np.full(len(sites), -1, dtype=np.int64)
    if not len(sites):
        return out
    inside = np.all((sites >= g.lo) & (sites <= g.hi), axis=1)
    out[inside] = g.discovered_at[g.flat(sites[inside])]
    return out


def _sites_discovered_at(st: EngineState, t: int) -> np.ndarray:
    g = st.grid
    return g.coords(np.flatnonzero(g.discovered_at == t))


def one_type_shadow(s2: Scenario) -> Scenario:
    """The one-type process on A u B with the slower jump probability ``p1``."""
    entries = tuple(InitEntry(e.site, e.count, Tag.ONE if e.tag is Tag.TWO else e.tag)
                    for e in s2.init.entries)
    return replace(s2, mode=Mode.ONE_TYPE, p2=None, init=InitialConfig(entries))


def run_dominated(s2: Scenario, f: RandomField) -> CoupledRun:
    """Run the one-type process on A u B (rate p1) beside the two-type process.

    Asserts after every step that the one-type discovered set is contained in
    the two-type one; with ``p1 == p2`` the sequences must be equal.
    """
    if s2.mode is not Mode.TWO_TYPE:
        raise CouplingError("run_dominated needs a two-type scenario")
    if s2.p1 > s2.p2:
        raise CouplingError(f"domination needs p1 <= p2 (got p1={s2.p1}, p2={s2.p2})")
    s1 = one_type_shadow(s2)
    a, b = initial_state(s1, f), initial_state(s2, f)
    cr = CoupledRun("full", a, b, equal=(s2.p1 == s2.p2) or None)
    for _ in range(s2.horizon):
        step(a, s1, f)
        step(b, s2, f)
        t = a.clock
        new_a = _sites_discovered_at(a, t)
        seen = discovery_time_at(b, new_a)
        for site in new_a[seen < 0]:
            cr.violations.append((t, tuple(int(c) for c in site)))
        if cr.equal:
            new_b = _sites_discovered_at(b, t)
            if len(new_a) != len(new_b) or not np.array_equal(np.sort(encode(new_a)), np.sort(encode(new_b))):
                cr.equal = False
        cr.steps_checked += 1
    return cr


def _guard_fraction(st: EngineState, sigma: SiteSet, t: int) -> float:
    P = st.particles
    from_sigma = np.isin(encode(P.origin), encode(sigma.points))
    if not from_sigma.any():
        return 0.0
    far = np.abs(P.pos[from_sigma]).sum(axis=1) > t ** 0.75
    return float(far.mean())


def run_sigma_coupled(s_base: Scenario, s_alt: Scenario, sigma: SiteSet, shared_seed: int,
                      independent_seed: int, trust_window: int | None = None,
                      audit: bool = False) -> CoupledRun:
    """Couple a run from ``s_base`` with one from ``s_alt``: shared randomness off ``sigma``.

    Computes the last time ``N_sigma`` (within the horizon) at which a
    particle from ``sigma`` finds a new site in the base run, the catch-up time
    ``N`` of the alternative run, and checks the time-shifted inclusion
    ``xi_base(n - N) <= xi_alt(n)`` for ``N < n <= T``.
    """
    for s in (s_base, s_alt):
        if s.mode is not Mode.ONE_TYPE:
            raise CouplingError("sigma coupling compares one-type processes")
        outside = difference(SiteSet([e.site for e in s.init.entries], d=s.dimension), sigma)
        if len(outside):
            raise CouplingError(f"sigma must contain every initial site; missing {sorted(outside)[:3]}")
    if (s_base.dimension, s_base.p1, s_base.eta, s_base.horizon) != (s_alt.dimension, s_alt.p1, s_alt.eta, s_alt.horizon):
        raise CouplingError("scenarios must share dimension, p, eta and horizon")
    T = s_base.horizon
    W = T // 4 if trust_window is None else int(trust_window)

    fa, fb = make_coupled_pair(shared_seed, independent_seed, sigma)
    if audit:
        fa, fb = fa.with_audit(), fb.with_audit()
    base, alt = initial_state(s_base, fa), initial_state(s_alt, fb)
    for _ in range(T):
        step(base, s_base, fa)
        step(alt, s_alt, fb)

    sharing = "split" if shared_seed != independent_seed else "full"
    cr = CoupledRun(sharing, base, alt, guard_fraction=_guard_fraction(base, sigma, T))
    if audit:
        keys = np.concatenate([fa.audit.keys(), fb.audit.keys()])
        cr.audit_mismatches = audit_locality(fa, fb, unique_rows(keys), sigma)

    P = base.particles
    from_sigma = np.isin(encode(P.origin), encode(sigma.points))
    last_disc = int(P.last_discovery[from_sigma].max(initial=-1))
    sigma_times = discovery_time_at(base, sigma.points)
    if np.any(sigma_times < 0):
        cr.trusted = False
        cr.inconclusive_reason = "sigma not fully discovered within the horizon"
        return cr
    cr.N_sigma = max(last_disc, int(sigma_times.max()))
    cr.trusted = last_disc <= T - W

    coords, times, _ = base.discovery_times()
    early = times <= cr.N_sigma
    alt_early = discovery_time_at(alt, coords[early])
    if np.any(alt_early < 0):
        cr.inconclusive_reason = "alternative run never covers the base set at N_sigma"
        return cr
    cr.N = int(alt_early.max(initial=0))

    deadline = np.maximum(times, 1) + cr.N
    check = deadline <= T
    alt_times = discovery_time_at(alt, coords[check])
    bad = (alt_times < 0) | (alt_times > deadline[check])
    for site, t in zip(coords[check][bad], deadline[check][bad]):
        cr.violations.append((int(t), tuple(int(c) for c in site)))
    cr.violations.sort()
    cr.steps_checked = max(0, T - cr.N)
    return cr
