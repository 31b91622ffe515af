"""CIM-inspired Ising heuristics (CAC, CFC, SFC), baselines, noise models and benchmarks."""
from .instances import (
    CouplingMatrix,
    GroundTruth,
    brute_force_ground,
    cut_value,
    ising_energy,
    load_gset,
    parse_gset,
    sk_random,
    to_gset,
)
from .sde import NoiseParams
from .solvers import PRESETS, ScheduleParams, get_preset, run_batch, run_trajectory

__version__ = "0.1.0"
