"""CSV/JSON emitters and readers for snapshots, shapes, histograms and reports."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .engine import Snapshot, Trajectory
from .lattice import SiteSet
from .measure import Lifetimes, ShapeEstimate

COORD_NAMES = ("x", "y", "z")


def write_snapshot_csv(snap: Snapshot, path: Path) -> Path:
    """Columns: t, x[, y[, z]], discovered_at, site_type."""
    cols = ["t", *COORD_NAMES[: snap.d], "discovered_at", "site_type"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for site, da, ty in zip(snap.sites.points, snap.discovered_at, snap.site_type):
            w.writerow([snap.t, *(int(c) for c in site), int(da), int(ty)])
    return path


def read_snapshot_csv(path: Path) -> tuple[int, SiteSet, int]:
    """Returns ``(t, sites, d)`` from a snapshot CSV."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        coord_cols = [i for i, h in enumerate(header) if h in COORD_NAMES]
        d = len(coord_cols)
        t = None
        pts = []
        for row in r:
            t = int(row[0])
            pts.append([int(row[i]) for i in coord_cols])
    if t is None:
        raise ValueError(f"snapshot {path} has no rows")
    return t, SiteSet(pts, d=d), d


def trajectory_summary(tr: Trajectory) -> dict:
    s = tr.scenario
    return {
        "mode": s.mode.value,
        "dimension": s.dimension,
        "seed": s.seed,
        "horizon": s.horizon,
        "checkpoints": [
            {"t": sn.t, "discovered": len(sn.sites), "active": sn.active,
             "activated": {"type1": sn.totals[0], "type2": sn.totals[1]},
             "recruited": {"type1": sn.recruited[0], "type2": sn.recruited[1]},
             "digest": f"{sn.digest:016x}" if sn.digest is not None else None}
            for sn in tr.snapshots
        ],
    }


def write_json(obj, path: Path) -> Path:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_shape_csv(est: ShapeEstimate, path: Path) -> Path:
    """Scaled point set: one row per discovered site, coordinates divided by n."""
    d = est.scaled.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", *COORD_NAMES[:d], *(f"{c}_scaled" for c in COORD_NAMES[:d])])
        n = est.scaled.scale
        for site in est.scaled.sites.points:
            w.writerow([n, *(int(c) for c in site), *(repr(float(c) / n) for c in site)])
    return path


def write_histogram_csv(lt: Lifetimes, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lifetime", "count"])
        w.writerows(lt.to_rows())
    return path


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def raster(sites: SiteSet, n: int) -> np.ndarray:
    """Boolean image of the scaled set: one pixel per site, window [-1.1, 1.1]^2, y up."""
    if sites.d != 2:
        raise ValueError("rendering needs a two-dimensional set")
    half = int(np.ceil(1.1 * n))
    img = np.zeros((2 * half + 1, 2 * half + 1), dtype=bool)
    pts = sites.points
    keep = np.all(np.abs(pts) <= half, axis=1)
    img[half - pts[keep, 1], pts[keep, 0] + half] = True
    return img


def write_pgm(img: np.ndarray, path: Path) -> Path:
    """Binary (P5) greymap: discovered pixels black on white."""
    h, w = img.shape
    body = np.where(img, 0, 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + body)
    return path
