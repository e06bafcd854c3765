"""Experiment descriptions and the scenario file format.

A scenario file is an INI document with four sections::

    [model]
    dimension = 2
    mode = two_type          # one_type | two_type
    p1 = 0.5
    p2 = 0.5                 # required in two_type mode
    tie_rule = coin_flip     # type1_wins | type2_wins | coin_flip | parity

    [eta]
    kind = poisson           # constant k | bernoulli q | poisson lambda | geometric q | zeta s
    lambda = 2.0

    [init]
    0,0 = 1 one              # site = count [one|two|none]
    1,0 = 1 two
    -2,-2..2,2 = 3 none      # inclusive box shorthand

    [run]
    horizon = 300
    seed = 7

Sites tagged ``none`` get an explicit sleeping count instead of a draw from
the product measure; they are not initially active.  Integers are decimal,
reals carry a decimal point.
"""
from __future__ import annotations

import configparser
import enum
import io
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import special, stats

from .lattice import Site, SiteSet
from .randomfield import RandomField, Stream


class ScenarioError(ValueError):
    """Raised for scenario documents that fail to parse or validate."""


class Mode(enum.Enum):
    ONE_TYPE = "one_type"
    TWO_TYPE = "two_type"


class Tag(enum.IntEnum):
    NONE = 0
    ONE = 1
    TWO = 2


class TieRule(enum.Enum):
    TYPE1_WINS = "type1_wins"
    TYPE2_WINS = "type2_wins"
    COIN_FLIP = "coin_flip"
    PARITY = "parity"


_ETA_PARAM = {"constant": "k", "bernoulli": "q", "poisson": "lambda", "geometric": "q", "zeta": "s"}
_ZETA_TABLE = 1 << 16


@dataclass(frozen=True)
class EtaDistribution:
    """Law of the number of sleeping particles per site.

    ``geometric q`` counts failures before the first success, so
    ``P(eta = k) = q (1 - q)**k`` for ``k >= 0``.  ``zeta s`` has
    ``P(eta = k) = k**-s / zeta(s)`` for ``k >= 1``.
    """

    kind: str
    param: float

    def __post_init__(self):
        kind, a = self.kind, self.param
        if kind not in _ETA_PARAM:
            raise ScenarioError(f"unknown eta kind {kind!r}")
        ok = {
            "constant": a >= 0 and float(a).is_integer(),
            "bernoulli": 0.0 <= a <= 1.0,
            "poisson": a > 0,
            "geometric": 0.0 < a <= 1.0,
            "zeta": a > 1,
        }[kind]
        if not ok:
            raise ScenarioError(f"invalid parameter {a} for eta kind {kind!r}")

    @classmethod
    def constant(cls, k: int) -> "EtaDistribution":
        return cls("constant", int(k))

    def mean(self) -> float:
        a = self.param
        if self.kind == "constant":
            return float(a)
        if self.kind in ("bernoulli", "poisson"):
            return float(a)
        if self.kind == "geometric":
            return (1 - a) / a
        return float(special.zeta(a - 1) / special.zeta(a)) if a > 2 else math.inf

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF ``min{k : F(k) > u}`` applied to uniforms in [0, 1)."""
        u = np.asarray(u, dtype=np.float64)
        a = self.param
        if self.kind == "constant":
            return np.full(u.shape, int(a), dtype=np.int64)
        if self.kind == "bernoulli":
            return (u < a).astype(np.int64)
        if self.kind == "geometric":
            if a == 1.0:
                return np.zeros(u.shape, dtype=np.int64)
            return np.floor(np.log1p(-u) / math.log1p(-a)).astype(np.int64)
        if self.kind == "poisson":
            kmax = int(math.ceil(a + 15 * math.sqrt(a) + 40))
            cdf = stats.poisson.cdf(np.arange(kmax + 1), a)
            return np.minimum(np.searchsorted(cdf, u, side="right"), kmax).astype(np.int64)
        return _zeta_quantile(u, a)


def _zeta_quantile(u: np.ndarray, s: float) -> np.ndarray:
    norm = special.zeta(s)
    ks = np.arange(1, _ZETA_TABLE + 1, dtype=np.float64)
    cdf = np.cumsum(ks ** -s) / norm
    out = np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
    tail = out > _ZETA_TABLE
    if tail.any():
        # Bisection beyond the table on the survival P(eta > k) = zeta(s, k + 1) / zeta(s).
        qt = 1.0 - u[tail]
        lo = np.full(qt.shape, float(_ZETA_TABLE))
        hi = np.full(qt.shape, 2.0 ** 62)
        for _ in range(80):
            mid = np.floor((lo + hi) / 2)
            above = special.zeta(s, mid + 1) / norm < qt
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.all(hi - lo <= 1):
                break
        out[tail] = hi.astype(np.int64)
    return out


def sample_eta(f: RandomField, eta: EtaDistribution, sites) -> np.ndarray:
    """Sleeping counts at ``sites``; a pure function of the field and the site."""
    sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    if eta.kind == "constant":
        return np.full(len(sites), int(eta.param), dtype=np.int64)
    return eta.quantile(f.uniforms(Stream.ETA, sites))


@dataclass(frozen=True)
class InitEntry:
    site: Site
    count: int
    tag: Tag


@dataclass(frozen=True)
class InitialConfig:
    entries: tuple[InitEntry, ...]

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda e: e.site))
        object.__setattr__(self, "entries", entries)
        seen = set()
        for e in entries:
            if e.site in seen:
                raise ScenarioError(f"site {e.site} listed twice (initial sets must be disjoint)")
            seen.add(e.site)
            if e.count < 1:
                raise ScenarioError(f"site {e.site} needs a positive particle count")
        if len({len(e.site) for e in entries}) > 1:
            raise ScenarioError("initial sites have mixed dimensions")

    @classmethod
    def from_sites(cls, *groups: tuple[Iterable[Site], int, Tag]) -> "InitialConfig":
        return cls(tuple(InitEntry(tuple(int(c) for c in s), int(n), Tag(t))
                         for sites, n, t in groups for s in sites))

    def sites_with(self, *tags: Tag) -> list[Site]:
        return [e.site for e in self.entries if e.tag in tags]

    def typed_sites(self, d: int) -> SiteSet:
        """A union B: the initially active sites."""
        return SiteSet(self.sites_with(Tag.ONE, Tag.TWO), d=d)


@dataclass(frozen=True)
class Scenario:
    dimension: int
    mode: Mode
    p1: float
    eta: EtaDistribution
    init: InitialConfig
    horizon: int
    seed: int
    p2: float | None = None
    tie_rule: TieRule = TieRule.TYPE1_WINS

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ScenarioError("dimension must be 1, 2 or 3")
        if not 0.0 < self.p1 <= 1.0:
            raise ScenarioError(f"p1 = {self.p1} outside (0, 1]")
        if self.horizon < 1:
            raise ScenarioError("horizon must be at least 1")
        for e in self.init.entries:
            if len(e.site) != self.dimension:
                raise ScenarioError(f"site {e.site} does not have dimension {self.dimension}")
        ones = self.init.sites_with(Tag.ONE)
        twos = self.init.sites_with(Tag.TWO)
        if self.mode is Mode.TWO_TYPE:
            if self.p2 is None:
                raise ScenarioError("two_type mode requires p2")
            if not 0.0 < self.p2 <= 1.0:
                raise ScenarioError(f"p2 = {self.p2} outside (0, 1]")
            if not ones or not twos:
                raise ScenarioError("two_type mode requires non-empty sets A and B")
        else:
            if twos:
                raise ScenarioError("one_type mode accepts only 'one' and 'none' tags")
            if not ones:
                raise ScenarioError("one_type mode requires a non-empty initial set")

    def threshold(self, tag: Tag) -> float:
        if tag is Tag.TWO and self.mode is Mode.TWO_TYPE:
            return float(self.p2)
        return float(self.p1)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))


def _parse_site(text: str, d: int | None = None) -> Site:
    try:
        site = tuple(int(c) for c in text.split(","))
    except ValueError as err:
        raise ScenarioError(f"bad site {text!r}") from err
    if d is not None and len(site) != d:
        raise ScenarioError(f"site {text!r} does not have dimension {d}")
    return site


def _expand_key(key: str, d: int) -> list[Site]:
    if ".." in key:
        lo_txt, hi_txt = key.split("..", 1)
        lo, hi = _parse_site(lo_txt, d), _parse_site(hi_txt, d)
        if any(a > b for a, b in zip(lo, hi)):
            raise ScenarioError(f"empty box {key!r}")
        return list(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))))
    return [_parse_site(key, d)]


def _get(cp: configparser.ConfigParser, section: str, key: str, conv, required=True):
    if not cp.has_option(section, key):
        if required:
            raise ScenarioError(f"missing [{section}] {key}")
        return None
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as err:
        raise ScenarioError(f"bad value for [{section}] {key}: {raw!r}") from err


def _enum(cls, raw: str, what: str):
    try:
        return cls(raw.strip().lower())
    except ValueError as err:
        raise ScenarioError(f"unknown {what} {raw!r}") from err


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ScenarioError(f"malformed scenario document: {err}") from err
    for section in ("model", "eta", "init", "run"):
        if not cp.has_section(section):
            raise ScenarioError(f"missing section [{section}]")

    d = _get(cp, "model", "dimension", int)
    mode = _enum(Mode, _get(cp, "model", "mode", str), "mode")
    p1 = _get(cp, "model", "p1", float)
    p2 = _get(cp, "model", "p2", float, required=False)
    tie_raw = _get(cp, "model", "tie_rule", str, required=False)
    tie = _enum(TieRule, tie_raw, "tie rule") if tie_raw else TieRule.TYPE1_WINS

    kind = _get(cp, "eta", "kind", str).strip().lower()
    if kind not in _ETA_PARAM:
        raise ScenarioError(f"unknown eta kind {kind!r}")
    param = _get(cp, "eta", _ETA_PARAM[kind], float)
    eta = EtaDistribution(kind, int(param) if kind == "constant" else param)

    entries = []
    for key, value in cp.items("init"):
        parts = value.split()
        if not parts or len(parts) > 2:
            raise ScenarioError(f"bad init entry {key} = {value!r}")
        try:
            count = int(parts[0])
        except ValueError as err:
            raise ScenarioError(f"bad particle count in {key} = {value!r}") from err
        tag_name = parts[1].upper() if len(parts) == 2 else "ONE"
        if tag_name not in Tag.__members__:
            raise ScenarioError(f"unknown tag {parts[1]!r}")
        for site in _expand_key(key, d):
            entries.append(InitEntry(site, count, Tag[tag_name]))

    horizon = _get(cp, "run", "horizon", int)
    seed = _get(cp, "run", "seed", int)
    return Scenario(d, mode, p1, eta, InitialConfig(tuple(entries)), horizon, seed,
                    p2=p2 if mode is Mode.TWO_TYPE else None, tie_rule=tie)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(s: Scenario) -> str:
    cp = configparser.ConfigParser()
    cp["model"] = {"dimension": str(s.dimension), "mode": s.mode.value,
                   "p1": repr(float(s.p1)), "tie_rule": s.tie_rule.value}
    if s.p2 is not None:
        cp["model"]["p2"] = repr(float(s.p2))
    param = int(s.eta.param) if s.eta.kind == "constant" else repr(float(s.eta.param))
    cp["eta"] = {"kind": s.eta.kind, _ETA_PARAM[s.eta.kind]: str(param)}
    cp["init"] = {",".join(map(str, e.site)): f"{e.count} {e.tag.name.lower()}"
                  for e in s.init.entries}
    cp["run"] = {"horizon": str(s.horizon), "seed": str(s.seed)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
