"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 coupling invariant
violated, 5 inconclusive coupling.  Replica ``i`` of any randomized command
uses seed ``seed_base + i``; where a second independent seed is needed it is
``seed_base + i + 2**32``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plotting, report
from .couplings import CouplingError, run_dominated, run_sigma_coupled
from .engine import run
from .lattice import box
from .measure import (
    coexistence_stat,
    compare_shapes,
    discovery_lifetimes,
    recruited_counts,
    shape_estimate,
)
from .randomfield import RandomField
from .scenario import Mode, ScenarioError, load_scenario

log = logging.getLogger("frogmodel")

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_VIOLATION, EXIT_INCONCLUSIVE = 0, 2, 3, 4, 5
SECOND_STREAM = 2 ** 32


class UsageError(Exception):
    pass


def _checkpoints(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError as err:
        raise UsageError(f"bad checkpoint list {text!r}") from err


def _load(path: str, horizon: int | None, seed: int | None):
    sc = load_scenario(path)
    if horizon is not None:
        sc = replace(sc, horizon=horizon)
    if seed is not None:
        sc = sc.with_seed(seed)
    return sc


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class Manifest:
    def __init__(self, args, out: Path):
        self.out = out
        self.data = {
            "command": args.command,
            "scenario": [str(p) for p in (args.scenario or [])],
            "out": str(out),
            "replicas": getattr(args, "replicas", None),
            "seed_base": getattr(args, "seed", None),
            "seeds": [],
            "files": [],
        }

    def add(self, path: Path) -> Path:
        self.data["files"].append({"path": Path(path).name, "sha256": report.file_digest(path)})
        return path

    def write(self) -> Path:
        self.data["files"].sort(key=lambda f: f["path"])
        return report.write_json(self.data, self.out / "manifest.json")


# ---------------------------------------------------------------- simulate

def cmd_simulate(args, man: Manifest) -> int:
    sc = _load(args.scenario[0], args.horizon, args.seed)
    cps = _checkpoints(args.checkpoints) or [sc.horizon]
    if cps[0] < 0 or cps[-1] > sc.horizon:
        raise UsageError(f"checkpoints must lie in [0, {sc.horizon}]")
    man.data["seeds"] = [sc.seed]
    tr = run(sc, RandomField(sc.seed), cps)
    for sn in tr.snapshots:
        man.add(report.write_snapshot_csv(sn, man.out / f"snapshot_t{sn.t}.csv"))
    man.add(report.write_json(report.trajectory_summary(tr), man.out / "trajectory.json"))
    return EXIT_OK


# ---------------------------------------------------------------- shape

def _shape_job(job):
    sc, cps = job
    tr = run(sc, RandomField(sc.seed), cps)
    ests = [shape_estimate(sn, symmetry=sn.d <= 3) for sn in tr.snapshots]
    return tr, ests


def cmd_shape(args, man: Manifest) -> int:
    sc = _load(args.scenario[0], args.horizon, None)
    seed_base = sc.seed if args.seed is None else args.seed
    cps = _checkpoints(args.checkpoints) or [sc.horizon]
    if cps[0] < 1 or cps[-1] > sc.horizon:
        raise UsageError(f"checkpoints must lie in [1, {sc.horizon}]")
    seeds = [seed_base + i for i in range(args.replicas)]
    man.data["seeds"] = seeds
    results = _pmap(_shape_job, [(sc.with_seed(s), cps) for s in seeds], args.workers)
    rows = []
    for i, (tr, ests) in enumerate(results):
        for est in ests:
            rows.append({"replica": i, "seed": seeds[i], **est.to_dict()})
        last = ests[-1]
        man.add(report.write_shape_csv(last, man.out / f"shape_r{i}.csv"))
        lt = discovery_lifetimes(tr)
        man.add(report.write_histogram_csv(lt, man.out / f"lifetimes_r{i}.csv"))
        rows[-1]["staleness"] = lt.staleness
        if sc.dimension == 2:
            man.add(plotting.render_shape(last.scaled.sites, last.scaled.scale, man.out / f"shape_r{i}.png",
                                          title=f"n = {last.scaled.scale}"))
    man.add(report.write_json({"estimates": rows}, man.out / "shape.json"))
    return EXIT_OK


# ---------------------------------------------------------------- compare-shapes

def _compare_job(job):
    sa, sb, cps = job
    ta = run(sa, RandomField(sa.seed), cps)
    tb = run(sb, RandomField(sb.seed), cps)
    return [compare_shapes(shape_estimate(a, symmetry=False), shape_estimate(b, symmetry=False))
            for a, b in zip(ta.snapshots, tb.snapshots)]


def cmd_compare_shapes(args, man: Manifest) -> int:
    if len(args.scenario) != 2:
        raise UsageError("compare-shapes needs exactly two --scenario files")
    sa = _load(args.scenario[0], args.horizon, None)
    sb = _load(args.scenario[1], args.horizon, None)
    if (sa.dimension, sa.p1, sa.eta) != (sb.dimension, sb.p1, sb.eta):
        raise UsageError("compared scenarios must share dimension, p and eta")
    cps = _checkpoints(args.checkpoints) or [sa.horizon]
    horizon = max(cps)
    if cps[0] < 1:
        raise UsageError("checkpoints must be positive")
    seed_base = sa.seed if args.seed is None else args.seed
    pairs = [(seed_base + i, seed_base + i + SECOND_STREAM) for i in range(args.replicas)]
    man.data["seeds"] = [list(p) for p in pairs]
    jobs = [(replace(sa, horizon=horizon, seed=a), replace(sb, horizon=horizon, seed=b), cps) for a, b in pairs]
    dists = _pmap(_compare_job, jobs, args.workers)
    medians = {n: float(np.median([d[i] for d in dists])) for i, n in enumerate(cps)}
    out = {"checkpoints": cps, "median": {str(n): m for n, m in medians.items()},
           "distances": [[float(x) for x in d] for d in dists],
           "non_increasing": all(medians[a] >= medians[b] for a, b in zip(cps, cps[1:]))}
    man.add(report.write_json(out, man.out / "compare_shapes.json"))
    man.add(plotting.plot_distance_trend(medians, man.out / "compare_shapes.png"))
    return EXIT_OK


# ---------------------------------------------------------------- coexist

def _coexist_job(job):
    sc, T = job
    return recruited_counts(run(sc, RandomField(sc.seed)), T)


def cmd_coexist(args, man: Manifest) -> int:
    if args.replicas < 1:
        raise UsageError("replica count must be at least 1")
    reports, labels = [], []
    for path in args.scenario:
        sc = _load(path, args.horizon, None)
        if sc.mode is not Mode.TWO_TYPE:
            raise UsageError(f"{path}: coexistence needs a two-type scenario")
        seed_base = sc.seed if args.seed is None else args.seed
        seeds = [seed_base + i for i in range(args.replicas)]
        man.data["seeds"].append(seeds)
        counts = _pmap(_coexist_job, [(sc.with_seed(s), sc.horizon) for s in seeds], args.workers)
        stat = coexistence_stat(counts, args.k_threshold, sc.horizon)
        reports.append({"scenario": str(path), **stat.to_dict()})
        labels.append(Path(path).stem)
    out = {"pairs": reports}
    if len(reports) > 1:
        lows = [r["wilson_95"][0] for r in reports]
        out["paired_test"] = {
            "any_bounded_away_from_zero": any(lo > 0 for lo in lows),
            "all_positive_frequency": all(r["frequency"] > 0 for r in reports),
            "intervals_overlap": max(lows) <= min(r["wilson_95"][1] for r in reports),
        }
    man.add(report.write_json(out, man.out / "coexist.json"))
    man.add(plotting.plot_coexistence(labels, [r["frequency"] for r in reports],
                                      [tuple(r["wilson_95"]) for r in reports], man.out / "coexist.png"))
    return EXIT_OK


# ---------------------------------------------------------------- couple

def _parse_box(text: str):
    try:
        lo, hi = text.split("..")
        return box(tuple(int(c) for c in lo.split(",")), tuple(int(c) for c in hi.split(",")))
    except ValueError as err:
        raise UsageError(f"bad --sigma box {text!r}; expected x0,y0..x1,y1") from err


def _dominated_job(sc):
    cr = run_dominated(sc, RandomField(sc.seed))
    return cr.report()


def _sigma_job(job):
    sb, sa, sigma, shared, indep, window = job
    return run_sigma_coupled(sb, sa, sigma, shared, indep, trust_window=window).report()


def cmd_couple(args, man: Manifest) -> int:
    if args.replicas < 1:
        raise UsageError("replica count must be at least 1")
    sc = _load(args.scenario[0], args.horizon, None)
    seed_base = sc.seed if args.seed is None else args.seed
    seeds = [seed_base + i for i in range(args.replicas)]
    man.data["seeds"] = seeds
    if args.mode == "dominated":
        if sc.mode is not Mode.TWO_TYPE:
            raise UsageError("dominated coupling needs a two-type scenario")
        if sc.p1 > sc.p2:
            raise UsageError(f"dominated coupling needs p1 <= p2 (got {sc.p1} > {sc.p2})")
        runs = _pmap(_dominated_job, [sc.with_seed(s) for s in seeds], args.workers)
    else:
        if len(args.scenario) != 2 or not args.sigma:
            raise UsageError("sigma coupling needs two --scenario files (base, alternative) and --sigma")
        alt = _load(args.scenario[1], args.horizon, None)
        sigma = _parse_box(args.sigma)
        jobs = [(sc, alt, sigma, s, s + SECOND_STREAM, args.trust_window) for s in seeds]
        try:
            runs = _pmap(_sigma_job, jobs, args.workers)
        except CouplingError as err:
            raise UsageError(str(err)) from err
    total = sum(len(r["violations"]) for r in runs)
    inconclusive = sum(1 for r in runs if r.get("inconclusive") or r["trusted"] is False)
    out = {"mode": args.mode, "replicas": len(runs), "violations_total": total,
           "inconclusive": inconclusive, "runs": runs}
    man.add(report.write_json(out, man.out / "couple.json"))
    if total:
        return EXIT_VIOLATION
    if args.mode == "sigma" and inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ---------------------------------------------------------------- render

def cmd_render(args, man: Manifest) -> int:
    if not args.snapshot:
        raise UsageError("render needs --snapshot")
    t, sites, d = report.read_snapshot_csv(Path(args.snapshot))
    if d != 2:
        raise UsageError(f"render needs a two-dimensional snapshot (got d = {d})")
    n = max(t, 1)
    stem = Path(args.snapshot).stem
    man.add(report.write_pgm(report.raster(sites, n), man.out / f"{stem}.pgm"))
    man.add(plotting.render_shape(sites, n, man.out / f"{stem}.svg", title=f"n = {n}"))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "shape": cmd_shape,
    "compare-shapes": cmd_compare_shapes,
    "coexist": cmd_coexist,
    "couple": cmd_couple,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frogmodel", description="Lazy frog model simulator and coupling checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", action="append", metavar="PATH",
                       required=name != "render", help="scenario file (repeat where a command takes several)")
        p.add_argument("--out", required=True, metavar="DIR")
        p.add_argument("--seed", type=int, default=None, metavar="U64", help="seed base (default: scenario seed)")
        p.add_argument("--horizon", type=int, default=None, metavar="N")
        p.add_argument("--workers", type=int, default=1, metavar="N")
        p.add_argument("--replicas", type=int, default=1, metavar="N")
        p.add_argument("--checkpoints", default=None, metavar="LIST", help="comma-separated times")
        p.add_argument("--k-threshold", type=int, default=50, metavar="N")
        if name == "couple":
            p.add_argument("--mode", choices=("dominated", "sigma"), default="dominated")
            p.add_argument("--sigma", default=None, metavar="BOX", help="inclusive box, e.g. --sigma=-2,-2..2,2")
            p.add_argument("--trust-window", type=int, default=None, metavar="W")
        if name == "render":
            p.add_argument("--snapshot", default=None, metavar="CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"error: cannot create {out}: {err}", file=sys.stderr)
        return EXIT_IO
    man = Manifest(args, out)
    try:
        if args.horizon is not None and args.horizon < 1:
            raise UsageError("--horizon must be at least 1")
        if args.k_threshold < 1:
            raise UsageError("--k-threshold must be at least 1")
        code = COMMANDS[args.command](args, man)
        man.write()
    except (UsageError, ScenarioError, CouplingError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
