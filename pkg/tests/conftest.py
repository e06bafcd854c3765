import numpy as np
import pytest

from frogmodel.lattice import box
from frogmodel.scenario import EtaDistribution, InitialConfig, Mode, Scenario, Tag, TieRule


def one_type(d=2, p=1.0, eta=None, T=50, seed=1, start=None, count=1):
    start = start or [(0,) * d]
    init = InitialConfig.from_sites((start, count, Tag.ONE))
    return Scenario(d, Mode.ONE_TYPE, p, eta or EtaDistribution.constant(1), init, T, seed)


def two_type(d=2, p1=0.5, p2=0.5, eta=None, T=50, seed=1, a=None, b=None, counts=(1, 1),
             tie=TieRule.TYPE1_WINS):
    a = a or [(0,) * d]
    b = b or [(1,) + (0,) * (d - 1)]
    init = InitialConfig.from_sites((a, counts[0], Tag.ONE), (b, counts[1], Tag.TWO))
    return Scenario(d, Mode.TWO_TYPE, p1, eta or EtaDistribution.constant(1), init, T, seed,
                    p2=p2, tie_rule=tie)


ETA_CHOICES = ("constant", "bernoulli", "poisson", "geometric", "zeta")


def random_eta(rng: np.random.Generator) -> EtaDistribution:
    kind = ETA_CHOICES[rng.integers(len(ETA_CHOICES))]
    if kind == "constant":
        return EtaDistribution.constant(int(rng.integers(0, 3)))
    if kind == "bernoulli":
        return EtaDistribution("bernoulli", float(rng.uniform(0.2, 1.0)))
    if kind == "poisson":
        return EtaDistribution("poisson", float(rng.uniform(0.3, 1.5)))
    if kind == "geometric":
        return EtaDistribution("geometric", float(rng.uniform(0.4, 1.0)))
    return EtaDistribution("zeta", float(rng.uniform(2.5, 4.0)))


def random_scenario(rng: np.random.Generator, T: int = 200, d: int | None = None) -> Scenario:
    """A random small scenario of either mode, d in {1, 2}."""
    d = d or int(rng.integers(1, 3))
    eta = random_eta(rng)
    seed = int(rng.integers(0, 2 ** 63))
    origin = (0,) * d
    e1 = (1,) + (0,) * (d - 1)
    if rng.random() < 0.5:
        start = [origin] if rng.random() < 0.5 else list(box((-1,) * d, (1,) * d))
        return one_type(d, float(rng.uniform(0.2, 1.0)), eta, T, seed, start, int(rng.integers(1, 3)))
    p1, p2 = sorted(rng.uniform(0.2, 1.0, size=2))
    far = (3,) + (0,) * (d - 1)
    b = [e1] if rng.random() < 0.5 else [far, (4,) + (0,) * (d - 1)]
    tie = list(TieRule)[int(rng.integers(len(TieRule)))]
    return two_type(d, float(p1), float(p2), eta, T, seed, [origin], b, (1, int(rng.integers(1, 3))), tie)


@pytest.fixture
def rng():
    return np.random.default_rng(20191201)


# Acceptance results, filled in by test_acceptance and printed after the run.
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d} {name}: {detail}")
