"""Truncated-Wigner (Euler-Maruyama) versions of the CAC, CFC and SFC solvers.

Amplitudes are normalised by the saturation parameter (``x = g * mu``), so the
pump/reservoir noise on the signal has variance ``g^2 (1/2 + x^2) dt`` per step
and the error pulse receives ``g^2 dt / 2``. The feedback uses amplitudes
inferred through the extraction beamsplitter, ``x~ = x + g sqrt((1-R)/(4R)) w``.

Each step consumes ``4 n`` standard normals per trajectory, in the order
``[inference on x, inference on e, diffusion on x, diffusion on e]``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .instances import CouplingMatrix, as_coupling
from .solvers.dynamics import (
    NumericalDivergence,
    SolverState,
    clamp_cac,
    clamp_cfc,
    step_values,
)
from .solvers.schedule import ScheduleParams

SDE_VARIANTS = ("cac", "cfc", "sfc")
DRAWS_PER_SPIN = 4


@dataclass(frozen=True)
class NoiseParams:
    g_sq: float
    r_b: float = 0.1
    rng_seed: int | None = None

    def __post_init__(self):
        if not self.g_sq > 0:
            raise ValueError(f"g_sq must be positive, got {self.g_sq}")
        if not 0 < self.r_b <= 1:
            raise ValueError(f"r_b must lie in (0, 1], got {self.r_b}")

    @property
    def inference_std(self) -> float:
        return float(np.sqrt(self.g_sq * (1.0 - self.r_b) / (4.0 * self.r_b)))


def infer(value, noise: NoiseParams, draw):
    """Homodyne-inferred amplitude: ``value + sqrt(g^2 (1-R)/(4R)) * draw``."""
    return value + noise.inference_std * draw


def sde_advance(variant, x, e, J: CouplingMatrix, vals, dt, noise: NoiseParams, draws,
                clamp=True):
    """One Euler-Maruyama step for a vector or a ``(batch, n)`` block.

    ``draws`` has shape ``(..., 4 * n)`` of independent standard normals.
    """
    n = x.shape[-1]
    w_ix = draws[..., :n]
    w_ie = draws[..., n:2 * n]
    w_x = draws[..., 2 * n:3 * n]
    w_e = draws[..., 3 * n:]
    xt = infer(x, noise, w_ix)
    et = infer(e, noise, w_ie)
    field = J.xi * J.local_fields(xt)
    p = vals["p"]
    beta = vals["beta"]
    if variant == "cac":
        dx = -(x * x * x) + (p - 1.0) * x - et * field
        de = -beta * e * (xt * xt - vals["alpha"])
    elif variant == "cfc":
        z = et * field
        dx = -(x * x * x) + (p - 1.0) * x - z
        de = -beta * e * (z * z - vals["alpha"])
    elif variant == "sfc":
        dx = (-(x * x * x) + (p - 1.0) * x - np.tanh(vals["c"] * field)
              - vals["k"] * (field - et))
        de = -beta * (e - field)
    else:
        raise ValueError(f"no stochastic version of variant {variant!r}")
    g_sq = noise.g_sq
    x_new = x + dt * dx + np.sqrt(g_sq * (0.5 + x * x) * dt) * w_x
    e_new = e + dt * de + np.sqrt(g_sq * dt / 2.0) * w_e
    if clamp and variant == "cac":
        x_new = clamp_cac(x_new, vals["alpha"])
    elif clamp and variant == "cfc":
        x_new, e_new = clamp_cfc(x_new, e_new)
    return x_new, e_new


def _sde_step(variant, state: SolverState, J, sched: ScheduleParams, noise: NoiseParams,
              step: int, rng=None, clamp=True) -> SolverState:
    J = as_coupling(J)
    x = np.asarray(state.x, dtype=np.float64)
    if x.shape[-1] != J.n:
        raise ValueError(f"state has {x.shape[-1]} spins, coupling matrix has {J.n}")
    if state.e is None:
        raise ValueError(f"{variant} state needs an error vector e")
    if rng is None:
        seed = 0 if noise.rng_seed is None else noise.rng_seed
        rng = np.random.default_rng([seed, step])
    draws = rng.standard_normal(x.shape[:-1] + (DRAWS_PER_SPIN * J.n,))
    vals = step_values(sched, variant, step)
    with np.errstate(over="ignore", invalid="ignore"):
        x_new, e_new = sde_advance(variant, x, state.e, J, vals, sched.dt, noise, draws, clamp)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(e_new))):
        raise NumericalDivergence(step, f"sde-{variant}")
    return replace(state, x=x_new, e=e_new, step=step + 1)


def sde_step_cac(state, J, sched, noise, step, rng=None, clamp=True):
    return _sde_step("cac", state, J, sched, noise, step, rng, clamp)


def sde_step_cfc(state, J, sched, noise, step, rng=None, clamp=True):
    return _sde_step("cfc", state, J, sched, noise, step, rng, clamp)


def sde_step_sfc(state, J, sched, noise, step, rng=None):
    return _sde_step("sfc", state, J, sched, noise, step, rng, clamp=False)
