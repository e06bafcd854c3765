import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from frogmodel.lattice import SiteSet, box
from frogmodel.randomfield import (
    KeyAudit,
    ParticleId,
    RandomField,
    Stream,
    audit_locality,
    make_coupled_pair,
    walk_indices,
)

MASK = (1 << 64) - 1


def _splitmix(z):
    z = (z + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def reference_uniform(seed, tag, origin, j, n, k):
    """Pure-int transcription of the documented key serialization."""
    h = _splitmix(seed & MASK)
    for w in list(origin) + [0] * (3 - len(origin)) + [j, int(tag), n, k]:
        h = _splitmix(h ^ (w & MASK))
    return (h >> 11) * 2.0 ** -53


@pytest.mark.parametrize("seed, tag, origin, j, n, k, expected", [
    (7, Stream.DELAY, (0, 0), 1, 0, 1, 0.18630338525355905),
    (2 ** 63 + 5, Stream.WALK, (-3, 4), 2, 17, 0, 0.9039883165487168),
    (0, Stream.ETA, (5,), 0, 0, 0, 0.3522609180053934),
])
def test_golden_values(seed, tag, origin, j, n, k, expected):
    assert reference_uniform(seed, tag, origin, j, n, k) == expected
    assert RandomField(seed).uniform(tag, origin, j, n, k) == expected


@given(st.integers(0, 2 ** 64 - 1), st.sampled_from(list(Stream)),
       st.lists(st.integers(-10 ** 6, 10 ** 6), min_size=1, max_size=3),
       st.integers(0, 10 ** 6), st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
@settings(max_examples=200, deadline=None)
def test_vectorized_matches_reference(seed, tag, origin, j, n, k):
    assert RandomField(seed).uniform(tag, origin, j, n, k) == reference_uniform(seed, tag, origin, j, n, k)


def test_uniform_is_pure():
    f = RandomField(11)
    a = f.uniform(Stream.DELAY, (2, -1), 3, 4, 5)
    assert f.uniform(Stream.DELAY, (2, -1), 3, 4, 5) == a
    assert 0.0 <= a < 1.0


def test_override_leaves_outside_keys_alone():
    sigma = box((-1, -1), (1, 1))
    f = RandomField(5)
    g = RandomField(5, sigma, 99)
    assert f.uniform(Stream.WALK, (2, 0), 1, 3) == g.uniform(Stream.WALK, (2, 0), 1, 3)
    assert f.uniform(Stream.WALK, (1, 0), 1, 3) != g.uniform(Stream.WALK, (1, 0), 1, 3)


def test_override_args_go_together():
    with pytest.raises(ValueError):
        RandomField(1, box((0, 0), (1, 1)), None)


def test_uniform_mean():
    n = 10 ** 6
    f = RandomField(2024)
    origins = np.zeros((n, 2), dtype=np.int64)
    u = f.uniforms(Stream.DELAY, origins, np.arange(n), 0, 1)
    assert abs(u.mean() - 0.5) < 0.002
    assert u.min() >= 0.0 and u.max() < 1.0


def test_walk_step_examples():
    f = RandomField(3)
    for j in range(1, 40):
        assert f.walk_step(ParticleId((0,), j), 0) in {(1,), (-1,)}
    pid = ParticleId((4, -2), 7)
    assert f.walk_step(pid, 12) == f.walk_step(pid, 12)
    with pytest.raises(ValueError):
        f.walk_step(pid, -1)


def test_walk_direction_chi_square():
    n = 10 ** 5
    f = RandomField(77)
    prefix = f.prefix(np.zeros((n, 2), dtype=np.int64), np.arange(1, n + 1))
    counts = np.bincount(walk_indices(prefix, 0, 2), minlength=4)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_walk_indices_agree_with_scalar_api():
    f = RandomField(8)
    prefix = f.prefix(np.array([[3, 1]] * 5), np.arange(1, 6))
    idx = walk_indices(prefix, np.arange(5), 2)
    table = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    for j in range(1, 6):
        assert table[idx[j - 1]] == f.walk_step(ParticleId((3, 1), j), j - 1)


def test_delay_threshold_one_always_jumps():
    f = RandomField(1)
    vals = [f.delay(ParticleId((0, 0), j), 0, 1) for j in range(1, 200)]
    assert all(v <= 1.0 for v in vals)
    with pytest.raises(ValueError):
        f.delay(ParticleId((0, 0), 1), 0, 0)


def test_delay_holding_time_geometric():
    n, p = 10 ** 5, 0.5
    f = RandomField(4321)
    origins = np.zeros((n, 2), dtype=np.int64)
    j = np.arange(1, n + 1)
    hold = np.zeros(n, dtype=np.int64)
    for k in range(1, 80):
        waiting = hold == 0
        if not waiting.any():
            break
        u = f.uniforms(Stream.DELAY, origins[waiting], j[waiting], 0, k)
        hold[np.flatnonzero(waiting)[u <= p]] = k
    assert (hold > 0).all()
    assert abs(hold.mean() - 2.0) < 0.05


def test_coupled_pair_empty_sigma_agrees_everywhere():
    fa, fb = make_coupled_pair(1, 2, SiteSet([], d=2))
    assert fa == fb
    assert fa.uniform(Stream.WALK, (0, 0), 1, 0) == fb.uniform(Stream.WALK, (0, 0), 1, 0)


def test_coupled_pair_differs_inside_sigma():
    sigma = box((-2, -2), (2, 2))
    fa, fb = make_coupled_pair(10, 20, sigma)
    assert fa.uniform(Stream.WALK, (0, 0), 1, 0) != fb.uniform(Stream.WALK, (0, 0), 1, 0)
    assert fa.uniform(Stream.WALK, (3, 0), 1, 0) == fb.uniform(Stream.WALK, (3, 0), 1, 0)


def test_coupled_pair_independent_inside_sigma():
    sigma = box((-2, -2), (2, 2))
    fa, fb = make_coupled_pair(10, 20, sigma)
    m = 10 ** 4
    origins = np.array(list(sigma))[np.arange(m) % len(sigma)]
    j = np.arange(m) // len(sigma) + 1
    ua = fa.uniforms(Stream.DELAY, origins, j, 0, 1)
    ub = fb.uniforms(Stream.DELAY, origins, j, 0, 1)
    assert abs(np.corrcoef(ua, ub)[0, 1]) < 0.03


@pytest.mark.parametrize("s, t", [(Stream.WALK, Stream.DELAY), (Stream.WALK, Stream.ETA),
                                  (Stream.DELAY, Stream.ETA), (Stream.TIE, Stream.DELAY)])
def test_stream_separation(s, t):
    n = 10 ** 5
    f = RandomField(555)
    origins = np.column_stack([np.arange(n) % 300 - 150, np.arange(n) // 300])
    a = f.uniforms(s, origins, 1, 2, 3)
    b = f.uniforms(t, origins, 1, 2, 3)
    table = np.histogram2d(a, b, bins=10, range=[[0, 1], [0, 1]])[0]
    assert stats.chi2_contingency(table).pvalue > 1e-3


def test_audit_locality_counts_only_outside_keys():
    sigma = box((0, 0), (0, 0))
    fa, fb = make_coupled_pair(1, 2, sigma)
    audit = KeyAudit()
    audit.record(Stream.WALK, np.array([[0, 0], [5, 5]]), 1, 0, 0)
    assert audit_locality(fa, fb, audit.keys(), sigma) == 0
    # A pair that disagrees everywhere is caught.
    assert audit_locality(RandomField(1), RandomField(2), audit.keys(), sigma) == 1
