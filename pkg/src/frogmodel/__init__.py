"""Seed-reproducible simulator of the one-type and two-type lazy frog model on Z^d."""
from .engine import EngineState, Snapshot, Trajectory, initial_state, run, snapshot, state_digest, step
from .lattice import ScaledSet, SiteSet, dilate, hausdorff, l1_ball, l1_norm, symmetry_defect
from .randomfield import ParticleId, RandomField, Stream, make_coupled_pair
from .scenario import (
    EtaDistribution,
    InitialConfig,
    Mode,
    Scenario,
    ScenarioError,
    Tag,
    TieRule,
    load_scenario,
    parse_scenario,
    sample_eta,
    serialize_scenario,
)

__version__ = "0.1.0"
