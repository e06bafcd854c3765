import json

import numpy as np
import pytest

from conftest import one_type, two_type
from frogmodel.cli import main
from frogmodel.lattice import box, l1_ball
from frogmodel.report import read_snapshot_csv
from frogmodel.scenario import serialize_scenario


def write(tmp_path, name, scenario):
    path = tmp_path / name
    path.write_text(serialize_scenario(scenario))
    return str(path)


def load(path):
    return json.loads(path.read_text())


def read_pgm(path):
    raw = path.read_bytes()
    magic, dims, maxval, body = raw.split(b"\n", 3)
    w, h = map(int, dims.split())
    assert magic == b"P5" and maxval == b"255"
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


@pytest.fixture
def one(tmp_path):
    return write(tmp_path, "one.ini", one_type(d=2, p=0.8, T=30, seed=5))


@pytest.fixture
def two(tmp_path):
    return write(tmp_path, "two.ini", two_type(d=2, p1=0.4, p2=0.8, T=30, seed=5))


def test_simulate_reproducible(tmp_path, one):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--scenario", one, "--checkpoints", "10", "--out", str(a)]) == 0
    assert main(["simulate", "--scenario", one, "--checkpoints", "10", "--out", str(b)]) == 0
    assert (a / "snapshot_t10.csv").exists()
    ma, mb = load(a / "manifest.json"), load(b / "manifest.json")
    assert ma["files"] == mb["files"]
    assert {f["path"] for f in ma["files"]} == {"snapshot_t10.csv", "trajectory.json"}
    assert ma["seeds"] == [5]


def test_simulate_seed_override_changes_output(tmp_path, one):
    main(["simulate", "--scenario", one, "--out", str(tmp_path / "a")])
    main(["simulate", "--scenario", one, "--seed", "6", "--out", str(tmp_path / "b")])
    da = load(tmp_path / "a" / "trajectory.json")["checkpoints"][0]["digest"]
    db = load(tmp_path / "b" / "trajectory.json")["checkpoints"][0]["digest"]
    assert da != db


def test_checkpoint_past_horizon(tmp_path, one):
    assert main(["simulate", "--scenario", one, "--checkpoints", "31", "--out", str(tmp_path / "o")]) == 2


def test_two_type_totals(tmp_path, two):
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", two, "--checkpoints", "0,30", "--out", str(out)]) == 0
    cps = load(out / "trajectory.json")["checkpoints"]
    assert cps[0]["activated"] == {"type1": 1, "type2": 1}
    assert cps[1]["activated"]["type1"] + cps[1]["activated"]["type2"] == cps[1]["active"]


def test_invalid_scenario(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\ndimension = 7\n")
    assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_io_failures(tmp_path, one):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", "--scenario", one, "--out", str(blocker / "sub")]) == 3
    assert main(["simulate", "--scenario", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 3


def test_render_singleton(tmp_path):
    snap = tmp_path / "snap.csv"
    snap.write_text("t,x,y,discovered_at,site_type\n10,0,0,0,1\n")
    out = tmp_path / "r"
    assert main(["render", "--snapshot", str(snap), "--out", str(out)]) == 0
    img = read_pgm(out / "snap.pgm")
    assert img.shape == (23, 23)
    assert np.argwhere(img == 0).tolist() == [[11, 11]]
    assert (out / "snap.svg").read_text().startswith("<?xml")


def test_render_ball_is_a_diamond(tmp_path):
    n = 12
    rows = "".join(f"{n},{x},{y},0,1\n" for x, y in l1_ball(n, 2).points)
    snap = tmp_path / "ball.csv"
    snap.write_text("t,x,y,discovered_at,site_type\n" + rows)
    out = tmp_path / "r"
    assert main(["render", "--snapshot", str(snap), "--out", str(out)]) == 0
    img = read_pgm(out / "ball.pgm")
    half = img.shape[0] // 2
    ys, xs = np.nonzero(img == 0)
    pts = {(int(x) - half, half - int(y)) for x, y in zip(xs, ys)}
    assert pts == l1_ball(n, 2).as_set()


def test_render_is_deterministic(tmp_path):
    snap = tmp_path / "snap.csv"
    snap.write_text("t,x,y,discovered_at,site_type\n3,0,0,0,1\n3,1,0,1,1\n")
    main(["render", "--snapshot", str(snap), "--out", str(tmp_path / "a")])
    main(["render", "--snapshot", str(snap), "--out", str(tmp_path / "b")])
    assert load(tmp_path / "a" / "manifest.json")["files"] == load(tmp_path / "b" / "manifest.json")["files"]


def test_render_rejects_other_dimensions(tmp_path):
    snap = tmp_path / "line.csv"
    snap.write_text("t,x,discovered_at,site_type\n1,0,0,1\n1,1,1,1\n")
    assert main(["render", "--snapshot", str(snap), "--out", str(tmp_path / "r")]) == 2


def test_couple_dominated(tmp_path, two):
    out = tmp_path / "c"
    assert main(["couple", "--mode", "dominated", "--scenario", two, "--replicas", "5", "--out", str(out)]) == 0
    rep = load(out / "couple.json")
    assert rep["violations_total"] == 0 and rep["replicas"] == 5
    assert load(out / "manifest.json")["seeds"] == [5, 6, 7, 8, 9]


def test_couple_rejects_p1_above_p2(tmp_path):
    bad = write(tmp_path, "bad.ini", two_type(p1=0.9, p2=0.3))
    assert main(["couple", "--scenario", bad, "--out", str(tmp_path / "c")]) == 2


def test_couple_sigma(tmp_path):
    base = write(tmp_path, "base.ini", one_type(d=2, p=0.8, T=60, seed=3))
    alt = write(tmp_path, "alt.ini", one_type(d=2, p=0.8, T=60, seed=3, start=list(box((-1, -1), (1, 1)))))
    out = tmp_path / "s"
    code = main(["couple", "--mode", "sigma", "--scenario", base, "--scenario", alt, "--sigma=-2,-2..2,2",
                 "--replicas", "2", "--out", str(out)])
    rep = load(out / "couple.json")
    assert rep["violations_total"] == 0
    assert code == (5 if rep["inconclusive"] else 0)
    assert main(["couple", "--mode", "sigma", "--scenario", base, "--scenario", alt, "--sigma", "0,0..0,0",
                 "--out", str(tmp_path / "t")]) == 2


def test_coexist(tmp_path, two):
    assert main(["coexist", "--scenario", two, "--replicas", "0", "--out", str(tmp_path / "z")]) == 2
    out = tmp_path / "x"
    assert main(["coexist", "--scenario", two, "--scenario", two, "--replicas", "3", "--k-threshold", "5",
                 "--out", str(out)]) == 0
    rep = load(out / "coexist.json")
    assert len(rep["pairs"]) == 2 and rep["pairs"][0]["replicas"] == 3
    assert rep["pairs"][0]["counts"] == rep["pairs"][1]["counts"]
    assert rep["paired_test"]["intervals_overlap"]
    assert (out / "coexist.png").exists()


def test_workers_do_not_change_results(tmp_path, two):
    for w in ("1", "2"):
        main(["coexist", "--scenario", two, "--replicas", "3", "--workers", w, "--out", str(tmp_path / w)])
    assert load(tmp_path / "1" / "coexist.json") == load(tmp_path / "2" / "coexist.json")


def test_shape_and_compare(tmp_path, one):
    out = tmp_path / "sh"
    assert main(["shape", "--scenario", one, "--checkpoints", "15,30", "--replicas", "2", "--out", str(out)]) == 0
    est = load(out / "shape.json")["estimates"]
    assert len(est) == 4
    assert all(e["inner_radius"] <= e["outer_radius"] <= 1 + 2 / e["n"] for e in est)
    assert (out / "shape_r0.png").exists() and (out / "lifetimes_r1.csv").exists()

    other = write(tmp_path, "box.ini", one_type(d=2, p=0.8, T=30, seed=5, start=list(box((-1, -1), (1, 1)))))
    out = tmp_path / "cmp"
    assert main(["compare-shapes", "--scenario", one, "--scenario", other, "--checkpoints", "10,20",
                 "--replicas", "2", "--out", str(out)]) == 0
    rep = load(out / "compare_shapes.json")
    assert set(rep["median"]) == {"10", "20"}
    assert main(["compare-shapes", "--scenario", one, "--out", str(tmp_path / "n")]) == 2


def test_snapshot_roundtrip(tmp_path, one):
    out = tmp_path / "o"
    main(["simulate", "--scenario", one, "--checkpoints", "12", "--out", str(out)])
    t, sites, d = read_snapshot_csv(out / "snapshot_t12.csv")
    assert (t, d) == (12, 2)
    assert (0, 0) in sites
