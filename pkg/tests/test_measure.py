import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import one_type, two_type
from frogmodel.engine import run
from frogmodel.lattice import SiteSet, box, l1_ball
from frogmodel.measure import (
    coexistence_stat,
    compare_shapes,
    discovery_lifetimes,
    median_shape_distance,
    mod_dev_check,
    run_coexistence,
    shape_estimate,
    wilson_interval,
)
from frogmodel.randomfield import RandomField
from frogmodel.scenario import EtaDistribution
from test_engine import public_path


@pytest.mark.parametrize("d, n", [(1, 7), (2, 10), (2, 33), (3, 6)])
def test_ball_shape(d, n):
    est = shape_estimate((l1_ball(n, d), n))
    assert est.inner_radius >= 1.0
    assert est.outer_radius <= 1.0 + d / n
    assert est.sym_defect == pytest.approx(0.0)


def test_singleton_shape():
    est = shape_estimate((SiteSet([(0, 0)]), 10))
    assert est.inner_radius == 0.0
    assert est.outer_radius == 0.0


def test_inner_radius_sees_holes():
    ball = l1_ball(5, 2).as_set()
    holed = SiteSet(ball - {(0, 3)})
    est = shape_estimate((holed, 5))
    assert est.inner_radius == pytest.approx(2 / 5)
    assert est.outer_radius == pytest.approx(1.0)


def test_shape_errors():
    with pytest.raises(ValueError):
        shape_estimate((SiteSet([], d=2), 5))
    with pytest.raises(ValueError):
        shape_estimate((SiteSet([(0, 0)]), 0))


@given(st.integers(0, 2 ** 32), st.floats(0.3, 1.0))
@settings(max_examples=10, deadline=None)
def test_radii_bounds_on_runs(seed, p):
    tr = run(one_type(d=2, p=p, T=30, eta=EtaDistribution("poisson", 1.0)), RandomField(seed), [30])
    est = shape_estimate(tr.snapshots[0], symmetry=False)
    assert 0 <= est.inner_radius <= est.outer_radius <= 1 + 2 / 30


def test_compare_identical_and_nested_balls():
    n = 40
    a = shape_estimate((l1_ball(n, 2), n), symmetry=False)
    b = shape_estimate((l1_ball(n - 1, 2), n), symmetry=False)
    assert compare_shapes(a, a) == 0.0
    assert compare_shapes(a, b) <= 1 / n


def test_compare_across_scales():
    a = shape_estimate((l1_ball(20, 2), 20), symmetry=False)
    b = shape_estimate((l1_ball(40, 2), 40), symmetry=False)
    assert compare_shapes(a, b) == pytest.approx(1 / 20)


@pytest.mark.parametrize("counts, K, expected", [((1000, 3), 10, False), ((50, 50), 50, True),
                                                 ((49, 50), 50, False)])
def test_coexistence_threshold(counts, K, expected):
    stat = coexistence_stat([counts], K, 300)
    assert stat.coexists == (expected,)
    assert stat.frequency == float(expected)


def test_coexistence_interval_and_errors():
    stat = coexistence_stat([(60, 60)] * 7 + [(60, 0)] * 3, 50, 300)
    lo, hi = stat.interval
    assert stat.frequency == 0.7
    assert lo < 0.7 < hi and 0 <= lo and hi <= 1
    assert stat.to_dict()["wilson_95"] == [lo, hi]
    with pytest.raises(ValueError):
        coexistence_stat([(1, 1)], 0, 10)


def test_wilson_matches_formula():
    x, n, z = 13, 40, 1.959963984540054
    ph = x / n
    centre = (ph + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * np.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n))
    assert wilson_interval(x, n) == pytest.approx((centre - half, centre + half))


def test_run_coexistence_uses_replica_seeds():
    s = two_type(d=2, p1=0.5, p2=0.5, T=60, a=[(0, 0)], b=[(1, 0)])
    stat = run_coexistence(s, 4, seed_base=100, K=5)
    assert stat.replicas == 4
    again = run_coexistence(s, 4, seed_base=100, K=5)
    assert stat.counts == again.counts
    tr = run(s.with_seed(101), RandomField(101), [60])
    assert stat.counts[1] == tr.snapshots[0].recruited
    with pytest.raises(ValueError):
        run_coexistence(s, 0, seed_base=0)
    with pytest.raises(ValueError):
        run_coexistence(one_type(), 3, seed_base=0)


def test_mod_dev_single_step():
    for alpha in (0.51, 0.75, 0.99):
        assert mod_dev_check(RandomField(3), alpha, 1, 200) == 0.0


def test_mod_dev_is_deterministic_and_sensible():
    f = RandomField(8)
    a = mod_dev_check(f, 0.6, 400, 500, chunk=64)
    assert a == mod_dev_check(RandomField(8), 0.6, 400, 500, chunk=500)
    # n**0.6 is about 36 against a displacement scale of 20: some, not most, walks exceed it.
    assert 0.0 < a < 0.5
    with pytest.raises(ValueError):
        mod_dev_check(f, 0.5, 10, 10)


def test_lifetime_of_a_lone_particle():
    T = 80
    s = one_type(d=2, p=0.7, T=T, seed=14, eta=EtaDistribution.constant(0))
    f = RandomField(14)
    lt = discovery_lifetimes(run(s, f))
    path = public_path(f, (0, 0), 0.7, T)
    seen, last = set(), 0
    for t, site in enumerate(path):
        if site not in seen:
            seen.add(site)
            last = t
    assert lt.lifetimes.tolist() == [last]


def test_lifetime_zero_without_discoveries():
    # A particle that never jumps off its site never discovers anything.
    s = one_type(d=1, p=1e-9, T=20, eta=EtaDistribution.constant(0))
    lt = discovery_lifetimes(run(s, RandomField(0)))
    assert lt.lifetimes.tolist() == [0]
    assert lt.to_rows() == [(0, 1)]


def test_histogram_totals():
    tr = run(one_type(d=2, p=1.0, T=60, seed=2), RandomField(2))
    lt = discovery_lifetimes(tr)
    assert lt.histogram.sum() == len(tr.state.particles)
    assert 0.0 <= lt.staleness <= 1.0


def test_median_shape_distance_small():
    a = one_type(d=2, p=0.8, T=40)
    b = one_type(d=2, p=0.8, T=40, start=list(box((-1, -1), (1, 1))), count=2)
    med = median_shape_distance(a, b, [20, 40], [(1, 2), (3, 4), (5, 6)])
    assert set(med) == {20, 40}
    assert all(0 <= v <= 2 for v in med.values())
    same = median_shape_distance(a, a, [20], [(1, 1)])
    assert same == {20: 0.0}
