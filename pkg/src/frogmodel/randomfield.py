"""Stateless keyed randomness.

Every random quantity used by the simulator is a pure function of a 64-bit
seed and an integer key, so two processes can share exactly the randomness a
coupling calls for no matter in which order they consume it.

Key canonicalization (part of the reproducibility contract)::

    h = splitmix64(seed)
    for w in (x0, x1, x2, j):          # origin padded with zeros to 3 coords
        h = splitmix64(h ^ w)          # the "particle prefix"
    for w in (tag, n, k):
        h = splitmix64(h ^ w)
    uniform = (h >> 11) * 2**-53

All words are 64-bit two's-complement.  ``splitmix64`` is the standard
SplitMix64 output function (add golden gamma, xor-shift-multiply twice).
Walk steps use ``floor(uniform * 2d)`` as an index into the direction table
``(+e0, -e0, +e1, -e1, +e2, -e2)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .lattice import MAX_DIM, Site, SiteSet, encode, unique_rows

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TO_UNIT = 2.0 ** -53
MASK64 = (1 << 64) - 1


class Stream(enum.IntEnum):
    WALK = 1
    DELAY = 2
    ETA = 3
    INIT = 4
    TIE = 5


class ParticleId(NamedTuple):
    origin: Site
    index: int


def splitmix64(z: np.ndarray) -> np.ndarray:
    z = z + _GAMMA
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _words(values, size: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim == 0:
        arr = np.full(size, arr, dtype=np.int64)
    return arr.view(np.uint64)


def _absorb(h: np.ndarray, words) -> np.ndarray:
    return splitmix64(h ^ _words(words, len(h)))


def to_unit(h: np.ndarray) -> np.ndarray:
    return (h >> _S11).astype(np.float64) * _TO_UNIT


def direction_table(d: int) -> np.ndarray:
    """Unit steps ordered +e0, -e0, +e1, -e1, ..."""
    table = np.zeros((2 * d, d), dtype=np.int64)
    for i in range(d):
        table[2 * i, i] = 1
        table[2 * i + 1, i] = -1
    return table


def _pad3(origins: np.ndarray) -> np.ndarray:
    origins = np.atleast_2d(np.asarray(origins, dtype=np.int64))
    if origins.shape[1] > MAX_DIM:
        raise ValueError("origins have more than 3 coordinates")
    out = np.zeros((len(origins), MAX_DIM), dtype=np.int64)
    out[:, : origins.shape[1]] = origins
    return out


@dataclass(frozen=True)
class KeyAudit:
    """Log of (tag, origin, j, n, k) keys touched by a run; used for coupling audits."""

    chunks: list = field(default_factory=list)

    def record(self, tag: Stream, origins: np.ndarray, j, n, k) -> None:
        size = len(origins)
        if not size:
            return
        cols = [np.broadcast_to(np.asarray(v, dtype=np.int64), (size,)) for v in (int(tag), j, n, k)]
        rows = np.column_stack(cols + [origins])
        self.chunks.append(rows)

    def keys(self) -> np.ndarray:
        """Unique touched keys as rows ``(tag, j, n, k, x0, ..)``."""
        if not self.chunks:
            return np.zeros((0, 4), dtype=np.int64)
        return unique_rows(np.concatenate(self.chunks))


@dataclass(frozen=True)
class RandomField:
    """Pure map from keys to uniforms, with an optional alternate seed on a region.

    Keys whose origin site lies in ``override_region`` are evaluated with
    ``override_seed``; all other keys see ``seed``.
    """

    seed: int
    override_region: SiteSet | None = None
    override_seed: int | None = None
    audit: KeyAudit | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if (self.override_region is None) != (self.override_seed is None):
            raise ValueError("override_region and override_seed go together")

    def _base(self, origins: np.ndarray) -> np.ndarray:
        h = splitmix64(np.full(len(origins), self.seed & MASK64, dtype=np.uint64))
        region = self.override_region
        if region is not None and len(region) and len(origins):
            if origins.shape[1] != region.d:
                raise ValueError("origin dimension does not match the override region")
            inside = np.isin(encode(origins), encode(region.points))
            if inside.any():
                h[inside] = splitmix64(np.array([self.override_seed & MASK64], dtype=np.uint64))[0]
        return h

    def prefix(self, origins, j) -> np.ndarray:
        """Per-particle hash prefix for ``(origin, j)``; the seed choice happens here."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.int64))
        h = self._base(origins)
        padded = _pad3(origins)
        for i in range(MAX_DIM):
            h = _absorb(h, padded[:, i])
        return _absorb(h, j)

    @staticmethod
    def finish(prefix: np.ndarray, tag: Stream, n, k) -> np.ndarray:
        h = _absorb(prefix, int(tag))
        h = _absorb(h, n)
        return _absorb(h, k)

    def uniforms(self, tag: Stream, origins, j=0, n=0, k=0) -> np.ndarray:
        """Vectorized uniforms in [0, 1) for a batch of keys."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.int64))
        if self.audit is not None:
            self.audit.record(tag, origins, j, n, k)
        return to_unit(self.finish(self.prefix(origins, j), tag, n, k))

    def uniform(self, tag: Stream, origin: Sequence[int], j: int = 0, n: int = 0, k: int = 0) -> float:
        return float(self.uniforms(tag, [tuple(origin)], j, n, k)[0])

    def walk_step(self, pid: ParticleId, n: int) -> Site:
        if n < 0:
            raise ValueError("jump index must be nonnegative")
        d = len(pid.origin)
        u = self.uniform(Stream.WALK, pid.origin, pid.index, n, 0)
        return tuple(int(c) for c in direction_table(d)[int(u * 2 * d)])

    def delay(self, pid: ParticleId, n: int, k: int) -> float:
        if n < 0 or k < 1:
            raise ValueError("delay needs n >= 0 and k >= 1")
        return self.uniform(Stream.DELAY, pid.origin, pid.index, n, k)

    def with_audit(self) -> "RandomField":
        return RandomField(self.seed, self.override_region, self.override_seed, KeyAudit())


def walk_indices(prefix: np.ndarray, n, d: int) -> np.ndarray:
    """Direction-table indices for walk step ``n`` of each particle prefix."""
    u = to_unit(RandomField.finish(prefix, Stream.WALK, n, 0))
    return (u * (2 * d)).astype(np.int64)


def delays(prefix: np.ndarray, n, k) -> np.ndarray:
    return to_unit(RandomField.finish(prefix, Stream.DELAY, n, k))


def make_coupled_pair(shared_seed: int, independent_seed: int, sigma: SiteSet | None):
    """Two fields equal off ``sigma`` and driven by different seeds on it.

    The first field uses ``shared_seed`` everywhere; the second switches to
    ``independent_seed`` for keys whose origin lies in ``sigma``.
    """
    first = RandomField(shared_seed)
    if sigma is None or not len(sigma):
        return first, RandomField(shared_seed)
    return first, RandomField(shared_seed, sigma, independent_seed)


def audit_locality(fa: RandomField, fb: RandomField, keys: np.ndarray, sigma: SiteSet | None) -> int:
    """Count keys with origin outside ``sigma`` whose raw bits differ between fields.

    ``keys`` has rows ``(tag, j, n, k, x0, ..)`` as produced by :class:`KeyAudit`.
    """
    if not len(keys):
        return 0
    origins = keys[:, 4:]
    if sigma is not None and len(sigma):
        keys = keys[~np.isin(encode(origins), encode(sigma.points))]
        origins = keys[:, 4:]
    mismatches = 0
    for tag in np.unique(keys[:, 0]):
        sel = keys[:, 0] == tag
        rows, org = keys[sel], origins[sel]
        ha = fa.finish(fa.prefix(org, rows[:, 1]), Stream(int(tag)), rows[:, 2], rows[:, 3])
        hb = fb.finish(fb.prefix(org, rows[:, 1]), Stream(int(tag)), rows[:, 2], rows[:, 3])
        mismatches += int(np.count_nonzero(ha != hb))
    return mismatches
