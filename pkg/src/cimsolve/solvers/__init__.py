"""Deterministic CIM-style solvers, baselines and the batch runner."""
from .dynamics import (
    VARIANTS,
    NumericalDivergence,
    SolverState,
    step_cac,
    step_cfc,
    step_dsbm,
    step_linear_baseline,
    step_sfc,
    step_tanh_baseline,
)
from .estimators import (
    SOLVERS,
    CACSolver,
    CFCSolver,
    DSBMSolver,
    LinearFeedbackSolver,
    SFCSolver,
    TanhFeedbackSolver,
)
from .runner import BatchRun, Trajectory, run_batch, run_trajectory, trajectory_seed
from .schedule import (
    PRESETS,
    Preset,
    ScheduleParams,
    get_preset,
    gset_preset,
    list_presets,
    schedule_value,
)

__all__ = [
    "SOLVERS", "CACSolver", "CFCSolver", "DSBMSolver", "LinearFeedbackSolver", "SFCSolver",
    "TanhFeedbackSolver",
    "VARIANTS", "NumericalDivergence", "SolverState", "step_cac", "step_cfc", "step_dsbm",
    "step_linear_baseline", "step_sfc", "step_tanh_baseline", "BatchRun", "Trajectory",
    "run_batch", "run_trajectory", "trajectory_seed", "PRESETS", "Preset", "ScheduleParams",
    "get_preset", "gset_preset", "list_presets", "schedule_value",
]
