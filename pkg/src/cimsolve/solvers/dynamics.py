"""Euler-integrated amplitude dynamics.

All kernels work on a single state vector or on a ``(batch, n)`` block of
independent trajectories. ``field`` is always the normalised mutual-coupling
signal ``xi * sum_j J_ij x_j`` (computed once per step by the caller so that a
whole batch shares one matrix product).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..instances import CouplingMatrix, as_coupling
from .schedule import ScheduleParams

VARIANTS = ("cac", "cfc", "sfc", "linear", "tanh", "dsbm")

VARIANT_PARAMS = {
    "cac": ("p", "alpha", "beta"),
    "cfc": ("p", "alpha", "beta"),
    "sfc": ("p", "c", "beta", "k"),
    "linear": ("p",),
    "tanh": ("p", "c"),
    "dsbm": ("c", "a"),
}

CFC_X_BOUND = 1.5
CFC_E_FLOOR = 0.01
DSBM_XI_SCALE = 0.5


class NumericalDivergence(FloatingPointError):
    """A trajectory produced a non-finite amplitude."""

    def __init__(self, step: int, variant: str = ""):
        self.step = step
        self.variant = variant
        super().__init__(f"{variant or 'solver'}: non-finite amplitude at step {step}")


@dataclass(frozen=True)
class SolverState:
    x: np.ndarray
    e: np.ndarray | None = None
    z: np.ndarray | None = None
    y: np.ndarray | None = None
    step: int = 0
    best_energy: float = np.inf
    best_config: np.ndarray | None = None


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant


# --------------------------------------------------------------------------- #
# right-hand sides
# --------------------------------------------------------------------------- #
def cac_rhs(x, e, field, p, alpha, beta):
    dx = -(x * x * x) + (p - 1.0) * x - e * field
    de = -beta * e * (x * x - alpha)
    return dx, de


def cfc_rhs(x, e, field, p, alpha, beta):
    z = e * field
    dx = -(x * x * x) + (p - 1.0) * x - z
    de = -beta * e * (z * z - alpha)
    return dx, de


def sfc_rhs(x, e, field, p, c, beta, k):
    dx = -(x * x * x) + (p - 1.0) * x - np.tanh(c * field) - k * (field - e)
    de = -beta * (e - field)
    return dx, de


def linear_rhs(x, field, p):
    return -(x * x * x) + (p - 1.0) * x - field


def tanh_rhs(x, field, p, c):
    return -(x * x * x) + (p - 1.0) * x - np.tanh(c * field)


def sign0(x):
    """``sign`` with ``sign(0) = 0`` (dSBM coupling discretisation)."""
    return np.sign(x)


def cac_bound(alpha) -> float:
    return 1.5 * np.sqrt(alpha)


def clamp_cac(x, alpha):
    b = cac_bound(alpha)
    return np.clip(x, -b, b)


def clamp_cfc(x, e):
    return np.clip(x, -CFC_X_BOUND, CFC_X_BOUND), np.maximum(e, CFC_E_FLOOR)


def advance(variant, x, e, y, field, vals, dt, clamp=True):
    """One Euler (or dSBM) update; returns new ``(x, e, y)``.

    ``vals`` maps parameter names to their value at this step.
    """
    if variant == "cac":
        dx, de = cac_rhs(x, e, field, vals["p"], vals["alpha"], vals["beta"])
        x = x + dt * dx
        e = e + dt * de
        if clamp:
            x = clamp_cac(x, vals["alpha"])
    elif variant == "cfc":
        dx, de = cfc_rhs(x, e, field, vals["p"], vals["alpha"], vals["beta"])
        x = x + dt * dx
        e = e + dt * de
        if clamp:
            x, e = clamp_cfc(x, e)
    elif variant == "sfc":
        dx, de = sfc_rhs(x, e, field, vals["p"], vals["c"], vals["beta"], vals["k"])
        x = x + dt * dx
        e = e + dt * de
    elif variant == "linear":
        x = x + dt * linear_rhs(x, field, vals["p"])
    elif variant == "tanh":
        x = x + dt * tanh_rhs(x, field, vals["p"], vals["c"])
    elif variant == "dsbm":
        # field is xi_sbm * J sign0(x); momentum first, then position, then walls
        y = y + dt * (-(1.0 - vals["a"]) * x - vals["c"] * field)
        x = x + dt * y
        wall = np.abs(x) > 1.0
        if np.any(wall):
            x = np.where(wall, np.sign(x), x)
            y = np.where(wall, 0.0, y)
    else:
        check_variant(variant)
    return x, e, y


def coupling_field(variant, J: CouplingMatrix, x, sbm_xi_scale=DSBM_XI_SCALE):
    if variant == "dsbm":
        return (sbm_xi_scale * J.xi) * J.local_fields(sign0(x))
    return J.xi * J.local_fields(x)


def step_values(sched: ScheduleParams, variant: str, step: int) -> dict:
    return {name: sched.value(name, step) for name in VARIANT_PARAMS[variant]}


# --------------------------------------------------------------------------- #
# single-step API
# --------------------------------------------------------------------------- #
def _step(variant, state: SolverState, J, sched: ScheduleParams, step: int, clamp=True,
          sbm_xi_scale=DSBM_XI_SCALE) -> SolverState:
    J = as_coupling(J)
    x = np.asarray(state.x, dtype=np.float64)
    if x.shape[-1] != J.n:
        raise ValueError(f"state has {x.shape[-1]} spins, coupling matrix has {J.n}")
    vals = step_values(sched, variant, step)
    field = coupling_field(variant, J, x, sbm_xi_scale)
    e = state.e
    y = state.y
    if variant in ("cac", "cfc", "sfc") and e is None:
        raise ValueError(f"{variant} state needs an error vector e")
    if variant == "dsbm" and y is None:
        raise ValueError("dsbm state needs a momentum vector y")
    with np.errstate(over="ignore", invalid="ignore"):
        x_new, e_new, y_new = advance(variant, x, e, y, field, vals, sched.dt, clamp)
    for arr in (x_new, e_new, y_new):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NumericalDivergence(step, variant)
    z = e * field if variant == "cfc" else field
    return replace(state, x=x_new, e=e_new, y=y_new, z=z, step=step + 1)


def step_cac(state, J, sched, step, clamp=True):
    return _step("cac", state, J, sched, step, clamp)


def step_cfc(state, J, sched, step, clamp=True):
    return _step("cfc", state, J, sched, step, clamp)


def step_sfc(state, J, sched, step):
    return _step("sfc", state, J, sched, step)


def step_linear_baseline(state, J, sched, step):
    return _step("linear", state, J, sched, step)


def step_tanh_baseline(state, J, sched, step):
    return _step("tanh", state, J, sched, step)


def step_dsbm(state, J, sched, step, sbm_xi_scale=DSBM_XI_SCALE):
    return _step("dsbm", state, J, sched, step, sbm_xi_scale=sbm_xi_scale)
