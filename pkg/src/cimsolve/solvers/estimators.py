"""Estimator-style wrappers around :func:`run_batch`.

``fit(J)`` runs a batch of trajectories on the coupling matrix and stores the
best spin configuration found in ``labels_`` (one +/-1 label per spin), the way
a clustering estimator labels its samples.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_coupling, check_positive_int, check_seed
from ..instances import cut_value, ising_energy
from .. import sde as _sde
from .dynamics import DSBM_XI_SCALE, VARIANT_PARAMS
from .runner import run_batch
from .schedule import ScheduleParams, get_preset


class _IsingSolver(BaseEstimator):
    _variant = ""

    def _schedule(self) -> ScheduleParams:
        params = {}
        for name in VARIANT_PARAMS[self._variant]:
            params[name] = getattr(self, name)
        t_r, t_p = self.t_r, self.t_p
        if t_r is None and t_p is None:
            # annealed parameters ramp over this share of the run, then hold
            t_r = int(round(getattr(self, "ramp_fraction", 1.0) * self.n_steps))
        return ScheduleParams(self.n_steps, self.dt, params, t_r=t_r, t_p=t_p)

    def _noise(self):
        g_sq = getattr(self, "g_sq", None)
        if g_sq is None:
            return None
        return _sde.NoiseParams(g_sq, self.r_b, self.noise_seed)

    def _run_kwargs(self) -> dict:
        return {}

    def fit(self, J, y=None):
        """Run ``n_trajectories`` trajectories on ``J``.

        Parameters
        ----------
        J : CouplingMatrix, array-like or sparse of shape (n, n)
        y : ignored
        """
        J = check_coupling(J)
        n_traj = check_positive_int(self.n_trajectories, "n_trajectories")
        seed = check_seed(self.random_state)
        run = run_batch(
            self._variant, J, self._schedule(), n_traj, seed,
            noise=self._noise(), track_energy=self.track_energy,
            n_jobs=self.n_jobs, **self._run_kwargs(),
        )
        self.run_ = run
        self.n_spins_ = J.n
        finite = np.isfinite(run.best_energy)
        if not np.any(finite):
            raise FloatingPointError("every trajectory diverged")
        i = int(np.argmin(np.where(finite, run.best_energy, np.inf)))
        self.labels_ = run.best_config[i].astype(np.int64)
        self.best_energy_ = float(run.best_energy[i])
        self.best_cut_ = float(cut_value(J, self.labels_))
        self.energies_ = run.best_energy.copy()
        self.n_diverged_ = run.n_diverged
        return self

    def fit_predict(self, J, y=None) -> np.ndarray:
        return self.fit(J).labels_

    def score(self, J, y=None) -> float:
        """Negative Ising energy of ``labels_`` on ``J`` (higher is better)."""
        check_is_fitted(self, "labels_")
        J = check_coupling(J)
        if J.n != self.n_spins_:
            raise ValueError(f"fitted on {self.n_spins_} spins, got {J.n}")
        return -float(ising_energy(J, self.labels_))

    @classmethod
    def from_preset(cls, name: str, **overrides):
        preset = get_preset(name)
        if preset.variant != cls._variant:
            raise ValueError(f"preset {name!r} is for {preset.variant}, not {cls._variant}")
        s = preset.schedule
        kw = dict(n_steps=s.n_steps, dt=s.dt, t_r=s.t_r, t_p=s.t_p)
        kw.update({k: v for k, v in s.params.items() if k in VARIANT_PARAMS[cls._variant]})
        kw.update(overrides)
        return cls(**kw)


class CACSolver(_IsingSolver):
    """Chaotic amplitude control."""

    _variant = "cac"

    def __init__(self, n_steps=3200, dt=0.125, p=(-1.0, 1.0), alpha=(1.0, 2.5), beta=0.8,
                 t_r=None, t_p=None, ramp_fraction=0.9, n_trajectories=100, random_state=None,
                 n_jobs=1, clamp=True, track_energy=True, g_sq=None, r_b=0.1, noise_seed=None):
        self.n_steps = n_steps
        self.dt = dt
        self.p = p
        self.alpha = alpha
        self.beta = beta
        self.t_r = t_r
        self.t_p = t_p
        self.ramp_fraction = ramp_fraction
        self.n_trajectories = n_trajectories
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.clamp = clamp
        self.track_energy = track_energy
        self.g_sq = g_sq
        self.r_b = r_b
        self.noise_seed = noise_seed

    def _run_kwargs(self):
        return {"clamp": self.clamp}


class CFCSolver(_IsingSolver):
    """Chaotic feedback control."""

    _variant = "cfc"

    def __init__(self, n_steps=1000, dt=0.4, p=(-1.0, 1.0), alpha=1.0, beta=0.2,
                 t_r=None, t_p=None, ramp_fraction=0.9, n_trajectories=100, random_state=None,
                 n_jobs=1, clamp=True, track_energy=True, g_sq=None, r_b=0.1, noise_seed=None):
        self.n_steps = n_steps
        self.dt = dt
        self.p = p
        self.alpha = alpha
        self.beta = beta
        self.t_r = t_r
        self.t_p = t_p
        self.ramp_fraction = ramp_fraction
        self.n_trajectories = n_trajectories
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.clamp = clamp
        self.track_energy = track_energy
        self.g_sq = g_sq
        self.r_b = r_b
        self.noise_seed = noise_seed

    def _run_kwargs(self):
        return {"clamp": self.clamp}


class SFCSolver(_IsingSolver):
    """Separated feedback control."""

    _variant = "sfc"

    def __init__(self, n_steps=500, dt=0.4, p=(-1.0, 1.0), c=(1.0, 3.0), beta=(0.3, 0.1),
                 k=0.2, t_r=None, t_p=None, ramp_fraction=1.0, n_trajectories=100,
                 random_state=None, n_jobs=1, track_energy=True, g_sq=None, r_b=0.1, noise_seed=None):
        self.n_steps = n_steps
        self.dt = dt
        self.p = p
        self.c = c
        self.beta = beta
        self.k = k
        self.t_r = t_r
        self.t_p = t_p
        self.ramp_fraction = ramp_fraction
        self.n_trajectories = n_trajectories
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.track_energy = track_energy
        self.g_sq = g_sq
        self.r_b = r_b
        self.noise_seed = noise_seed


class LinearFeedbackSolver(_IsingSolver):
    """Plain CIM with linear mutual coupling and no error correction."""

    _variant = "linear"

    def __init__(self, n_steps=1000, dt=0.05, p=1.5, t_r=None, t_p=None,
                 n_trajectories=100, random_state=None, n_jobs=1, track_energy=True):
        self.n_steps = n_steps
        self.dt = dt
        self.p = p
        self.t_r = t_r
        self.t_p = t_p
        self.n_trajectories = n_trajectories
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.track_energy = track_energy


class TanhFeedbackSolver(_IsingSolver):
    """CIM with a tanh-filtered mutual coupling."""

    _variant = "tanh"

    def __init__(self, n_steps=1000, dt=0.05, p=1.5, c=1.0, t_r=None, t_p=None,
                 n_trajectories=100, random_state=None, n_jobs=1, track_energy=True):
        self.n_steps = n_steps
        self.dt = dt
        self.p = p
        self.c = c
        self.t_r = t_r
        self.t_p = t_p
        self.n_trajectories = n_trajectories
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.track_energy = track_energy


class DSBMSolver(_IsingSolver):
    """Discrete simulated bifurcation with inelastic walls."""

    _variant = "dsbm"

    def __init__(self, n_steps=2000, dt=1.25, c=0.5, a=(0.0, 1.0), t_r=None, t_p=None,
                 sbm_xi_scale=DSBM_XI_SCALE, n_trajectories=100, random_state=None, n_jobs=1,
                 track_energy=True):
        self.n_steps = n_steps
        self.dt = dt
        self.c = c
        self.a = a
        self.t_r = t_r
        self.t_p = t_p
        self.sbm_xi_scale = sbm_xi_scale
        self.n_trajectories = n_trajectories
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.track_energy = track_energy

    def _run_kwargs(self):
        return {"sbm_xi_scale": self.sbm_xi_scale}


SOLVERS = {
    "cac": CACSolver,
    "cfc": CFCSolver,
    "sfc": SFCSolver,
    "linear": LinearFeedbackSolver,
    "tanh": TanhFeedbackSolver,
    "dsbm": DSBMSolver,
}
