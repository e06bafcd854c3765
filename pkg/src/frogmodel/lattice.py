"""Integer-lattice geometry: L1 balls, dilations, and point-set comparisons.

Sites are plain tuples of ints.  Site sets are stored as sorted, de-duplicated
``(N, d)`` int64 arrays so that sets with hundreds of thousands of members stay
cheap to build and compare.  All distances use the L1 ground metric.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Iterator

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

Site = tuple[int, ...]

MAX_DIM = 3


def l1_norm(x: Iterable[int]) -> int:
    return int(sum(abs(int(c)) for c in x))


def _check_dim(d: int) -> None:
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")


def unique_rows(a: np.ndarray) -> np.ndarray:
    """Lexicographically sorted distinct rows of an integer matrix."""
    if len(a) < 2:
        return a.copy()
    a = a[np.lexsort(a.T[::-1])]
    keep = np.ones(len(a), dtype=bool)
    keep[1:] = np.any(a[1:] != a[:-1], axis=1)
    return a[keep]


class SiteSet:
    """Immutable finite set of lattice sites of a common dimension."""

    __slots__ = ("_pts", "_d")

    def __init__(self, points: Iterable[Iterable[int]] | np.ndarray = (), d: int | None = None):
        arr = np.asarray(points if isinstance(points, np.ndarray) else list(map(tuple, points)),
                         dtype=np.int64)
        if arr.size == 0:
            if d is None:
                raise ValueError("dimension required for an empty SiteSet")
            arr = arr.reshape(0, d)
        if arr.ndim != 2:
            raise ValueError("points must be a sequence of coordinate tuples")
        if d is not None and arr.shape[1] != d:
            raise ValueError(f"expected {d}-dimensional sites, got {arr.shape[1]}")
        _check_dim(arr.shape[1])
        arr = unique_rows(arr)
        arr.setflags(write=False)
        self._pts = arr
        self._d = arr.shape[1]

    @classmethod
    def _from_unique(cls, arr: np.ndarray) -> "SiteSet":
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.int64)
        arr.setflags(write=False)
        obj._pts = arr
        obj._d = arr.shape[1]
        return obj

    @property
    def d(self) -> int:
        return self._d

    @property
    def points(self) -> np.ndarray:
        """Sorted ``(N, d)`` read-only coordinate array."""
        return self._pts

    def __len__(self) -> int:
        return len(self._pts)

    def __iter__(self) -> Iterator[Site]:
        return (tuple(int(c) for c in row) for row in self._pts)

    def __contains__(self, site) -> bool:
        site = np.asarray(site, dtype=np.int64)
        if site.shape != (self._d,) or not len(self._pts):
            return False
        return bool(np.any(np.all(self._pts == site, axis=1)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SiteSet):
            return NotImplemented
        return self._d == other._d and np.array_equal(self._pts, other._pts)

    def __hash__(self) -> int:
        return hash((self._d, self._pts.tobytes()))

    def __repr__(self) -> str:
        if len(self) <= 8:
            return f"SiteSet({sorted(self)})"
        return f"SiteSet(<{len(self)} sites, d={self._d}>)"

    def contains_all(self, other: "SiteSet") -> bool:
        return len(difference(other, self)) == 0

    def as_set(self) -> set[Site]:
        return set(self)


def encode(points: np.ndarray) -> np.ndarray:
    """Pack coordinates (|c| < 2**20) into one sortable int64 per site."""
    pts = np.asarray(points, dtype=np.int64)
    out = np.zeros(len(pts), dtype=np.int64)
    for i in range(pts.shape[1]):
        out = (out << 21) | (pts[:, i] + (1 << 20))
    return out


def difference(a: SiteSet, b: SiteSet) -> SiteSet:
    """Sites of ``a`` not in ``b``."""
    if not len(a) or not len(b):
        return a
    mask = ~np.isin(encode(a.points), encode(b.points))
    return SiteSet._from_unique(a.points[mask])


def union(*sets: SiteSet) -> SiteSet:
    return SiteSet(np.concatenate([s.points for s in sets]), d=sets[0].d)


def l1_ball(r: float, d: int) -> SiteSet:
    """All lattice points of Z^d with L1 norm at most ``r``."""
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    _check_dim(d)
    R = int(np.floor(r))
    axis = np.arange(-R, R + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return SiteSet._from_unique(grid[np.abs(grid).sum(axis=1) <= R])


def dilate(s: SiteSet, r: int) -> SiteSet:
    """Minkowski sum of ``s`` with the lattice L1 ball of radius ``r``."""
    if r == 0 or not len(s):
        return s
    offsets = l1_ball(r, s.d).points
    summed = (s.points[:, None, :] + offsets[None, :, :]).reshape(-1, s.d)
    return SiteSet(summed, d=s.d)


def box(lo: Site, hi: Site) -> SiteSet:
    """Axis-aligned box of sites with corners ``lo`` and ``hi`` (inclusive)."""
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    return SiteSet(grid, d=len(lo))


class ScaledSet:
    """The point set ``{x / n : x in sites}``, kept as integer sites plus ``n``."""

    __slots__ = ("sites", "scale")

    def __init__(self, sites: SiteSet, scale: int = 1):
        if scale < 1:
            raise ValueError("scale must be a positive integer")
        self.sites = sites
        self.scale = int(scale)

    @property
    def d(self) -> int:
        return self.sites.d

    def __len__(self) -> int:
        return len(self.sites)

    def as_floats(self) -> np.ndarray:
        return self.sites.points / self.scale

    def __repr__(self) -> str:
        return f"ScaledSet({self.sites!r}, scale={self.scale})"


def _directed_grid(a: np.ndarray, b: np.ndarray) -> int:
    # Taxicab chamfer transform is exact for L1 on a box holding both sets.
    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    hi = np.maximum(a.max(axis=0), b.max(axis=0))
    free = np.ones(tuple(hi - lo + 1), dtype=bool)
    free[tuple((b - lo).T)] = False
    dist = ndimage.distance_transform_cdt(free, metric="taxicab")
    return int(dist[tuple((a - lo).T)].max())


def _grid_ok(a: np.ndarray, b: np.ndarray) -> bool:
    span = np.maximum(a.max(axis=0), b.max(axis=0)) - np.minimum(a.min(axis=0), b.min(axis=0)) + 1
    return int(np.prod(span)) <= 50_000_000


def hausdorff(a: ScaledSet, b: ScaledSet) -> float:
    """Symmetric Hausdorff distance between two scaled sets under the L1 metric."""
    if not len(a) or not len(b):
        raise ValueError("hausdorff distance needs two non-empty sets")
    if a.d != b.d:
        raise ValueError("sets have different dimensions")
    pa, pb = a.sites.points, b.sites.points
    if a.scale == b.scale and _grid_ok(pa, pb):
        return max(_directed_grid(pa, pb), _directed_grid(pb, pa)) / a.scale
    fa, fb = a.as_floats(), b.as_floats()
    da, _ = cKDTree(fb).query(fa, p=1)
    db, _ = cKDTree(fa).query(fb, p=1)
    return float(max(da.max(), db.max()))


def signed_permutations(d: int) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """The 2^d d! hyperoctahedral maps as (axis permutation, sign vector)."""
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            yield perm, signs


def apply_symmetry(s: SiteSet, perm, signs) -> SiteSet:
    return SiteSet(s.points[:, list(perm)] * np.asarray(signs), d=s.d)


def symmetry_defect(s: ScaledSet) -> float:
    """Largest Hausdorff distance between ``s`` and any of its lattice-symmetry images."""
    if not len(s):
        raise ValueError("symmetry defect of an empty set")
    worst = 0.0
    for perm, signs in signed_permutations(s.d):
        image = ScaledSet(apply_symmetry(s.sites, perm, signs), s.scale)
        worst = max(worst, hausdorff(s, image))
    return worst
