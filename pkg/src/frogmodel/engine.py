"""Step-synchronous frog model dynamics for the one-type and two-type models.

Per step every active particle makes one jump attempt: with ``n`` jumps made
and ``k`` attempts at its current site (counting this one), it jumps iff the
delay uniform for ``(n, k)`` is at most the jump probability of its type.
All jumps are applied against the pre-step state; then each undiscovered site
receiving at least one arrival becomes discovered and its sleeping particles
are activated with the discovering type.  Particles activated at time ``t``
make their first attempt in step ``t + 1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice import SiteSet, encode
from .randomfield import (
    MASK64,
    RandomField,
    Stream,
    delays,
    direction_table,
    splitmix64,
    walk_indices,
)
from .scenario import Mode, Scenario, Tag, TieRule, sample_eta

log = logging.getLogger(__name__)

UNDISCOVERED = -1


class Grid:
    """Dense site table over a growable box; sites materialize on first discovery or query."""

    def __init__(self, d: int, lo: np.ndarray, hi: np.ndarray):
        self.d = d
        self.lo = np.asarray(lo, dtype=np.int64)
        self.shape = tuple(int(s) for s in np.asarray(hi) - self.lo + 1)
        size = int(np.prod(self.shape))
        self.discovered_at = np.full(size, UNDISCOVERED, dtype=np.int32)
        self.site_type = np.zeros(size, dtype=np.int8)
        self.sleeping = np.zeros(size, dtype=np.int64)
        self.initial = np.full(size, -1, dtype=np.int64)   # -1 = not materialized
        self.preset = np.full(size, -1, dtype=np.int64)    # explicit counts from the scenario

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.shape) - 1

    def _strides(self, shape=None) -> np.ndarray:
        shape = self.shape if shape is None else shape
        return np.array([int(np.prod(shape[i + 1:])) for i in range(self.d)], dtype=np.int64)

    def flat(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=np.int64) - self.lo) @ self._strides()

    def coords(self, flat: np.ndarray) -> np.ndarray:
        return np.stack(np.unravel_index(flat, self.shape), axis=1).astype(np.int64) + self.lo

    def ensure(self, pts: np.ndarray) -> None:
        if not len(pts):
            return
        pmin, pmax = pts.min(axis=0), pts.max(axis=0)
        if np.all(pmin >= self.lo) and np.all(pmax <= self.hi):
            return
        margin = np.maximum(16, (self.hi - self.lo) // 2)
        lo = np.where(pmin < self.lo, np.minimum(self.lo, pmin) - margin, self.lo)
        hi = np.where(pmax > self.hi, np.maximum(self.hi, pmax) + margin, self.hi)
        self._regrid(lo, hi)

    def _regrid(self, lo: np.ndarray, hi: np.ndarray) -> None:
        old_shape, old_lo = self.shape, self.lo
        new_shape = tuple(int(s) for s in hi - lo + 1)
        offset = tuple(slice(int(a), int(a) + s) for a, s in zip(old_lo - lo, old_shape))
        for name, fill in (("discovered_at", UNDISCOVERED), ("site_type", 0),
                           ("sleeping", 0), ("initial", -1), ("preset", -1)):
            old = getattr(self, name).reshape(old_shape)
            new = np.full(new_shape, fill, dtype=old.dtype)
            new[offset] = old
            setattr(self, name, new.reshape(-1))
        self.lo, self.shape = np.asarray(lo, dtype=np.int64), new_shape

    def discovered_flat(self, t: int | None = None) -> np.ndarray:
        da = self.discovered_at
        mask = da >= 0 if t is None else (da >= 0) & (da <= t)
        return np.flatnonzero(mask)


class ParticleTable:
    """Append-only columnar store of activated particles."""

    COLUMNS = ("index", "jumps", "attempts", "ptype", "activated_at", "prefix", "last_discovery")

    def __init__(self, d: int):
        self.d = d
        self.n = 0
        self._cap = 0
        self._origin = np.zeros((0, d), dtype=np.int64)
        self._pos = np.zeros((0, d), dtype=np.int64)
        self._cols = {
            "index": np.zeros(0, dtype=np.int64),
            "jumps": np.zeros(0, dtype=np.int64),
            "attempts": np.zeros(0, dtype=np.int64),
            "ptype": np.zeros(0, dtype=np.int8),
            "activated_at": np.zeros(0, dtype=np.int64),
            "prefix": np.zeros(0, dtype=np.uint64),
            "last_discovery": np.zeros(0, dtype=np.int64),
        }

    def __len__(self) -> int:
        return self.n

    def _grow(self, need: int) -> None:
        cap = max(64, self._cap)
        while cap < need:
            cap *= 2
        def widen(a):
            out = np.zeros((cap,) + a.shape[1:], dtype=a.dtype)
            out[: self.n] = a[: self.n]
            return out
        self._origin, self._pos = widen(self._origin), widen(self._pos)
        self._cols = {k: widen(v) for k, v in self._cols.items()}
        self._cap = cap

    def append(self, origin: np.ndarray, index: np.ndarray, ptype: np.ndarray, t: int, prefix: np.ndarray) -> None:
        m = len(index)
        if not m:
            return
        if self.n + m > self._cap:
            self._grow(self.n + m)
        sl = slice(self.n, self.n + m)
        self._origin[sl] = origin
        self._pos[sl] = origin
        c = self._cols
        c["index"][sl] = index
        c["jumps"][sl] = 0
        c["attempts"][sl] = 0
        c["ptype"][sl] = ptype
        c["activated_at"][sl] = t
        c["prefix"][sl] = prefix
        c["last_discovery"][sl] = -1
        self.n += m

    @property
    def origin(self) -> np.ndarray:
        return self._origin[: self.n]

    @property
    def pos(self) -> np.ndarray:
        return self._pos[: self.n]

    def __getattr__(self, name):
        cols = self.__dict__.get("_cols")
        if cols is not None and name in cols:
            return cols[name][: self.__dict__["n"]]
        raise AttributeError(name)

    def copy(self) -> "ParticleTable":
        other = ParticleTable(self.d)
        other.n = other._cap = self.n
        other._origin, other._pos = self.origin.copy(), self.pos.copy()
        other._cols = {k: getattr(self, k).copy() for k in self.COLUMNS}
        return other


@dataclass
class DiscoveryLog:
    chunks: list = field(default_factory=list)

    def append(self, t: int, sites: np.ndarray, types: np.ndarray, origins: np.ndarray, index: np.ndarray) -> None:
        rows = np.column_stack([np.full(len(sites), t, dtype=np.int64), sites, types.astype(np.int64),
                                origins, index])
        self.chunks.append(rows)

    def rows(self) -> np.ndarray:
        """``(t, site.., type, discoverer origin.., discoverer j)`` rows in discovery order."""
        return np.concatenate(self.chunks) if self.chunks else np.zeros((0, 0), dtype=np.int64)


@dataclass
class EngineState:
    d: int
    clock: int
    particles: ParticleTable
    grid: Grid
    totals: np.ndarray
    log: DiscoveryLog
    retired: np.ndarray | None = None

    def discovered(self, t: int | None = None) -> SiteSet:
        flat = self.grid.discovered_flat(t)
        return SiteSet._from_unique(self.grid.coords(flat))

    def discovery_times(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinates, discovery times and types of all discovered sites."""
        flat = self.grid.discovered_flat()
        return self.grid.coords(flat), self.grid.discovered_at[flat].astype(np.int64), self.grid.site_type[flat]

    def sleeping_at(self, site: Sequence[int], scenario: Scenario, f: RandomField) -> int:
        """Sleeping count at ``site``, materializing it on first query."""
        pt = np.asarray([site], dtype=np.int64)
        self.grid.ensure(pt)
        idx = self.grid.flat(pt)
        _materialize(self.grid, idx, pt, scenario, f)
        return int(self.grid.sleeping[idx[0]])

    def copy(self) -> "EngineState":
        g = Grid.__new__(Grid)
        g.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.grid.__dict__.items()})
        return EngineState(self.d, self.clock, self.particles.copy(), g, self.totals.copy(),
                           DiscoveryLog(list(self.log.chunks)),
                           None if self.retired is None else self.retired.copy())


def _materialize(grid: Grid, idx: np.ndarray, pts: np.ndarray, scenario: Scenario, f: RandomField) -> np.ndarray:
    """Set initial/sleeping counts at not-yet-materialized sites; returns counts at ``idx``."""
    fresh = grid.initial[idx] < 0
    if fresh.any():
        fidx = idx[fresh]
        counts = grid.preset[fidx].copy()
        draw = counts < 0
        if draw.any():
            if f.audit is not None:
                f.audit.record(Stream.ETA, pts[fresh][draw], 0, 0, 0)
            counts[draw] = sample_eta(f, scenario.eta, pts[fresh][draw])
        grid.initial[fidx] = counts
        grid.sleeping[fidx] = counts
    return grid.sleeping[idx]


def initial_state(scenario: Scenario, f: RandomField) -> EngineState:
    d = scenario.dimension
    entries = scenario.init.entries
    sites = np.array([e.site for e in entries], dtype=np.int64).reshape(-1, d)
    lo, hi = sites.min(axis=0) - 16, sites.max(axis=0) + 16
    grid = Grid(d, lo, hi)
    table = ParticleTable(d)
    totals = np.zeros(3, dtype=np.int64)
    log_ = DiscoveryLog()

    counts = np.array([e.count for e in entries], dtype=np.int64)
    tags = np.array([int(e.tag) for e in entries], dtype=np.int8)
    idx = grid.flat(sites)
    grid.preset[idx] = counts
    active = tags != int(Tag.NONE)
    aidx = idx[active]
    grid.initial[aidx] = counts[active]
    grid.sleeping[aidx] = 0
    grid.discovered_at[aidx] = 0
    grid.site_type[aidx] = tags[active]
    _activate(table, sites[active], counts[active], tags[active], 0, f)
    for tg in (1, 2):
        totals[tg] = counts[active][tags[active] == tg].sum()
    log_.append(0, sites[active], tags[active], sites[active], np.zeros(int(active.sum()), dtype=np.int64))
    return EngineState(d, 0, table, grid, totals, log_)


def _activate(table: ParticleTable, sites: np.ndarray, counts: np.ndarray, types: np.ndarray, t: int,
              f: RandomField) -> None:
    total = int(counts.sum())
    if not total:
        return
    origin = np.repeat(sites, counts, axis=0)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    index = np.arange(total, dtype=np.int64) - starts + 1
    ptype = np.repeat(types, counts)
    table.append(origin, index, ptype, t, f.prefix(origin, index))


def _tie_types(scenario: Scenario, f: RandomField, sites: np.ndarray, t: int) -> np.ndarray:
    rule = scenario.tie_rule
    if rule is TieRule.TYPE1_WINS:
        return np.ones(len(sites), dtype=np.int8)
    if rule is TieRule.TYPE2_WINS:
        return np.full(len(sites), 2, dtype=np.int8)
    if rule is TieRule.PARITY:
        return np.where(sites.sum(axis=1) % 2 == 0, 1, 2).astype(np.int8)
    u = f.uniforms(Stream.TIE, sites, 0, t, 0)
    return np.where(u < 0.5, 1, 2).astype(np.int8)


def step(st: EngineState, scenario: Scenario, f: RandomField) -> EngineState:
    """Advance ``st`` by one time step in place and return it."""
    t = st.clock
    P = st.particles
    d = st.d
    live = None if st.retired is None else np.flatnonzero(~st.retired[: len(P)])

    ptype = P.ptype if live is None else P.ptype[live]
    jumps = P.jumps if live is None else P.jumps[live]
    prefix = P.prefix if live is None else P.prefix[live]
    k = (P.attempts if live is None else P.attempts[live]) + 1

    thr = np.where(ptype == 2, scenario.threshold(Tag.TWO), scenario.p1)
    jump = np.ones(len(ptype), dtype=bool)
    lazy = np.flatnonzero(thr < 1.0)
    if len(lazy):
        jump[lazy] = delays(prefix[lazy], jumps[lazy], k[lazy]) <= thr[lazy]
    J = np.flatnonzero(jump)
    if f.audit is not None:
        rows = lazy if live is None else live[lazy]
        f.audit.record(Stream.DELAY, P.origin[rows], P.index[rows], jumps[lazy], k[lazy])
        rows = J if live is None else live[J]
        f.audit.record(Stream.WALK, P.origin[rows], P.index[rows], jumps[J], 0)

    steps = direction_table(d)[walk_indices(prefix[J], jumps[J], d)]
    rows = J if live is None else live[J]
    newpos = P.pos[rows] + steps
    P.pos[rows] = newpos
    P.jumps[rows] += 1
    if live is None:
        P.attempts[:] = np.where(jump, 0, k)
    else:
        P.attempts[live] = np.where(jump, 0, k)

    t1 = t + 1
    grid = st.grid
    grid.ensure(newpos)
    idx = grid.flat(newpos)
    fresh = grid.discovered_at[idx] == UNDISCOVERED
    if fresh.any():
        arrivals = rows[fresh]
        aidx = idx[fresh]
        usites, inv = np.unique(aidx, return_inverse=True)
        atype = P.ptype[arrivals]
        if scenario.mode is Mode.ONE_TYPE:
            stype = np.ones(len(usites), dtype=np.int8)
        else:
            has1 = np.zeros(len(usites), dtype=bool)
            has2 = np.zeros(len(usites), dtype=bool)
            has1[inv[atype == 1]] = True
            has2[inv[atype == 2]] = True
            stype = np.where(has1, 1, 2).astype(np.int8)
            both = has1 & has2
            if both.any():
                stype[both] = _tie_types(scenario, f, grid.coords(usites[both]), t1)
        grid.discovered_at[usites] = t1
        grid.site_type[usites] = stype
        P.last_discovery[arrivals] = t1

        coords = grid.coords(usites)
        # Discoverer: smallest (origin, j) among arrivals of the winning type.
        win = atype == stype[inv]
        cand = arrivals[win]
        keys = [P.index[cand]] + [P.origin[cand][:, i] for i in range(d - 1, -1, -1)] + [inv[win]]
        order = np.lexsort(keys)
        first = order[np.unique(inv[win][order], return_index=True)[1]]
        disc = cand[first]
        st.log.append(t1, coords, stype, P.origin[disc], P.index[disc])

        counts = _materialize(grid, usites, coords, scenario, f).copy()
        grid.sleeping[usites] = 0
        _activate(P, coords, counts, stype, t1, f)
        for tg in (1, 2):
            st.totals[tg] += counts[stype == tg].sum()
        if st.retired is not None and len(P) > len(st.retired):
            st.retired = np.concatenate([st.retired, np.zeros(len(P) - len(st.retired), dtype=bool)])
    st.clock = t1
    return st


def retire_stale(st: EngineState, window: int) -> int:
    """Freeze particles with no discovery (or activation) in the last ``window`` steps.

    This changes the dynamics; it is a speed option resting on the fact that a
    given particle discovers only finitely many sites.
    """
    P = st.particles
    if st.retired is None:
        st.retired = np.zeros(len(P), dtype=bool)
    recent = np.maximum(P.last_discovery, P.activated_at)
    newly = (~st.retired) & (recent < st.clock - window)
    st.retired |= newly
    return int(newly.sum())


def _mix_rows(cols: Iterable[np.ndarray], salt: int) -> np.ndarray:
    cols = list(cols)
    h = splitmix64(np.full(len(cols[0]), salt, dtype=np.uint64))
    for c in cols:
        h = splitmix64(h ^ np.asarray(c, dtype=np.int64).view(np.uint64))
    return h


def state_digest(st: EngineState) -> int:
    """Order-independent 64-bit digest of the particle table and discovered sites."""
    P = st.particles
    total = np.uint64(0)
    with np.errstate(over="ignore"):
        if len(P):
            cols = [P.origin[:, i] for i in range(st.d)] + [P.index] + [P.pos[:, i] for i in range(st.d)]
            cols += [P.jumps, P.attempts, P.ptype.astype(np.int64), P.activated_at]
            total += np.add.reduce(_mix_rows(cols, 0x51), dtype=np.uint64)
        flat = st.grid.discovered_flat()
        if len(flat):
            xy = st.grid.coords(flat)
            g = st.grid
            cols = [xy[:, i] for i in range(st.d)] + [g.discovered_at[flat].astype(np.int64),
                                                      g.site_type[flat].astype(np.int64),
                                                      g.sleeping[flat], g.initial[flat]]
            total += np.add.reduce(_mix_rows(cols, 0x52), dtype=np.uint64)
        head = _mix_rows([np.array([st.clock, len(P), st.d])], 0x53)[0]
    return int(splitmix64(np.array([total ^ head], dtype=np.uint64))[0])


@dataclass(frozen=True)
class Snapshot:
    t: int
    sites: SiteSet
    discovered_at: np.ndarray
    site_type: np.ndarray
    totals: tuple[int, int]
    recruited: tuple[int, int]
    active: int
    digest: int | None = None

    @property
    def d(self) -> int:
        return self.sites.d


def snapshot(st: EngineState, t: int | None = None, digest: bool = True) -> Snapshot:
    """Discovered set and counters at time ``t`` (default: now).

    Anything at an earlier time can be read off the current state because
    discovery and activation records never change; the digest is only
    available for the current time.
    """
    t = st.clock if t is None else t
    if t > st.clock:
        raise ValueError(f"time {t} is in the future of the state (clock {st.clock})")
    flat = st.grid.discovered_flat(t)
    coords = st.grid.coords(flat)
    order = np.lexsort(coords.T[::-1])
    P = st.particles
    born = P.activated_at <= t
    totals = tuple(int(np.count_nonzero(born & (P.ptype == tg))) for tg in (1, 2))
    rec = tuple(int(np.count_nonzero(born & (P.activated_at > 0) & (P.ptype == tg))) for tg in (1, 2))
    return Snapshot(t, SiteSet._from_unique(coords[order]), st.grid.discovered_at[flat][order].astype(np.int64),
                    st.grid.site_type[flat][order].copy(), totals, rec, int(born.sum()),
                    state_digest(st) if digest and t == st.clock else None)


@dataclass
class Trajectory:
    scenario: Scenario
    snapshots: list[Snapshot]
    state: EngineState


def run(scenario: Scenario, f: RandomField, checkpoints: Iterable[int] = (), *,
        retire_window: int | None = None, on_step=None) -> Trajectory:
    """Run to the horizon, recording snapshots at ``checkpoints``.

    ``on_step(state)`` is called after the initial state and after every step.
    """
    cps = sorted(set(int(c) for c in checkpoints))
    if cps and (cps[0] < 0 or cps[-1] > scenario.horizon):
        raise ValueError(f"checkpoints must lie in [0, {scenario.horizon}]")
    if retire_window is not None:
        log.warning("particle retirement enabled (window %d): results are approximate", retire_window)
    st = initial_state(scenario, f)
    snaps = []
    pending = list(cps)
    if on_step is not None:
        on_step(st)
    while True:
        while pending and pending[0] == st.clock:
            snaps.append(snapshot(st))
            pending.pop(0)
        if st.clock >= scenario.horizon:
            break
        step(st, scenario, f)
        if retire_window is not None:
            retire_stale(st, retire_window)
        if on_step is not None:
            on_step(st)
    return Trajectory(scenario, snaps, st)


def speed_bound_violations(st: EngineState, start: SiteSet) -> np.ndarray:
    """Discovered sites farther (L1) from ``start`` than their discovery time."""
    coords, times, _ = st.discovery_times()
    dist = np.full(len(coords), np.iinfo(np.int64).max)
    for a in start.points:
        dist = np.minimum(dist, np.abs(coords - a).sum(axis=1))
    return coords[dist > times]


class InvariantMonitor:
    """Checks the deterministic engine invariants after each step.

    Call :meth:`check` with the state after the initial state and after every
    step; violation messages accumulate in :attr:`violations`.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.start = scenario.init.typed_sites(scenario.dimension)
        self.init_sites = SiteSet([e.site for e in scenario.init.entries], d=scenario.dimension)
        self.violations: list[str] = []
        self._sites: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._ptype: np.ndarray | None = None
        self._pact: np.ndarray | None = None

    def _fail(self, t: int, msg: str) -> None:
        self.violations.append(f"t={t}: {msg}")

    def check(self, st: EngineState) -> None:
        t = st.clock
        grid, P = st.grid, st.particles
        coords, times, types = st.discovery_times()
        keys = encode(coords)

        if self._sites is not None:
            pk, pt, pty = self._sites
            pos = np.searchsorted(keys, pk)
            pos = np.minimum(pos, len(keys) - 1)
            found = keys[pos] == pk if len(keys) else np.zeros(len(pk), dtype=bool)
            if not found.all():
                self._fail(t, f"{int((~found).sum())} sites un-discovered")
            elif np.any(times[pos] != pt) or np.any(types[pos] != pty):
                self._fail(t, "discovery time or site type of an old site changed")
        order = np.argsort(keys)
        self._sites = (keys[order], times[order], types[order])
        keys = keys[order]
        coords, times, types = coords[order], times[order], types[order]

        if np.any(times > t):
            self._fail(t, "site discovered in the future")
        bad = speed_bound_violations(st, self.start)
        if len(bad):
            self._fail(t, f"{len(bad)} sites beyond the speed bound")

        flat = grid.flat(coords)
        if np.any(grid.sleeping[flat] != 0):
            self._fail(t, "discovered site still holds sleeping particles")
        if self.scenario.mode is Mode.TWO_TYPE and np.any(types == 0):
            self._fail(t, "discovered site without a type")

        n = len(P)
        if self._ptype is not None:
            m = len(self._ptype)
            if n < m or np.any(P.ptype[:m] != self._ptype) or np.any(P.activated_at[:m] != self._pact):
                self._fail(t, "particle type or activation time changed")
        self._ptype, self._pact = P.ptype.copy(), P.activated_at.copy()

        # Conservation per materialized site.
        mat = np.flatnonzero(grid.initial >= 0)
        ofl = grid.flat(P.origin)
        active_from = np.bincount(ofl, minlength=len(grid.initial))
        if np.any(grid.initial[mat] != grid.sleeping[mat] + active_from[mat]):
            self._fail(t, "particle conservation broken")
        if np.any(active_from[grid.initial < 0] > 0):
            self._fail(t, "active particle from an unmaterialized site")

        # Activation causality.
        if n:
            origin_da = grid.discovered_at[ofl].astype(np.int64)
            is_init = np.isin(encode(P.origin), encode(self.start.points))
            ok = np.where(is_init, P.activated_at == 0, P.activated_at == origin_da)
            if not ok.all():
                self._fail(t, f"{int((~ok).sum())} particles violate activation causality")
            if np.any(grid.site_type[ofl] != P.ptype):
                self._fail(t, "particle type differs from its origin site type")
            if np.any(P.activated_at > t):
                self._fail(t, "particle activated in the future")
            pflat = grid.flat(P.pos)
            if np.any(grid.discovered_at[pflat] == UNDISCOVERED):
                self._fail(t, "active particle on an undiscovered site")
