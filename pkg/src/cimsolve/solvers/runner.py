"""Batched trajectory simulation.

Trajectories are simulated in fixed-size chunks (rows of one ``(chunk, n)``
array). Chunk membership depends only on the trajectory index, every
trajectory draws from its own seeded stream, and the per-row arithmetic does
not depend on the other rows, so results do not change with ``n_jobs``.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .. import sde as _sde
from ..instances import CouplingMatrix, as_coupling, spins_from_amplitudes
from .dynamics import (
    DSBM_XI_SCALE,
    VARIANT_PARAMS,
    NumericalDivergence,
    SolverState,
    advance,
    check_variant,
    coupling_field,
)
from .schedule import ScheduleParams

INIT_STD = {"cac": 1e-4, "cfc": 0.1, "sfc": 0.1, "linear": 0.1, "tanh": 0.1}
INIT_E = {"cac": 1.0, "cfc": 1.0, "sfc": 0.0}
DSBM_INIT_HALFWIDTH = 0.1
NOISE_BLOCK = 16
FULL_REFRESH = 256


def instance_key(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf8"))


def trajectory_seed(master_seed: int, key, index: int, stream: int = 0) -> np.random.SeedSequence:
    """Seed for trajectory ``index`` of instance ``key``; independent of batch layout."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(instance_key(key), int(index), stream))


def initial_state(variant: str, n: int, rng: np.random.Generator, init_std: float | None = None):
    """Draw ``(x, e, y)`` for one trajectory."""
    if variant == "dsbm":
        x = rng.uniform(-DSBM_INIT_HALFWIDTH, DSBM_INIT_HALFWIDTH, n)
        return x, None, np.zeros(n)
    std = INIT_STD[variant] if init_std is None else init_std
    x = rng.normal(0.0, std, n)
    e = np.full(n, INIT_E[variant]) if variant in INIT_E else None
    return x, e, None


@dataclass
class Trajectory:
    final_state: SolverState
    best_energy: float
    first_hit_step: int
    final_energy: float
    final_attains_best: bool
    best_config: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass
class BatchRun:
    """Raw per-trajectory outcome of :func:`run_batch`."""

    variant: str
    instance_id: str
    schedule: ScheduleParams
    best_energy: np.ndarray
    first_hit: np.ndarray
    final_energy: np.ndarray
    best_config: np.ndarray
    final_x: np.ndarray
    diverged_at: np.ndarray
    mean_energy: np.ndarray | None = None
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_trajectories(self) -> int:
        return self.best_energy.size

    @property
    def n_diverged(self) -> int:
        return int(np.count_nonzero(self.diverged_at >= 0))

    def subset(self, idx) -> "BatchRun":
        idx = np.asarray(idx)
        return BatchRun(
            self.variant, self.instance_id, self.schedule,
            self.best_energy[idx], self.first_hit[idx], self.final_energy[idx],
            self.best_config[idx], self.final_x[idx], self.diverged_at[idx],
            None if self.mean_energy is None else self.mean_energy[idx],
            {k: v[idx] for k, v in self.snapshots.items()},
        )


class _EnergyTracker:
    """Ising energy of ``sign(x)`` for each row, updated incrementally.

    For symmetric integer-valued couplings the local fields and energies are
    updated through the flipped columns only. Integer arithmetic in float64 is
    exact, so the result matches a full recompute.
    """

    def __init__(self, J: CouplingMatrix, x):
        self.J = J
        A = J.entries
        self.incremental = (
            J.sparse is None
            and J.symmetric
            and np.array_equal(A, np.round(A))
            and np.abs(A).sum() < 2.0**50
        )
        self.JT = np.ascontiguousarray(A.T) if self.incremental else None
        self.neg = np.asarray(x) < 0
        self._refresh()
        self.counter = 0

    def _refresh(self):
        S = np.where(self.neg, -1.0, 1.0)
        self.H = self.J.local_fields(S)
        self.E = 0.5 * np.einsum("ij,ij->i", S, self.H)

    @property
    def S(self):
        return np.where(self.neg, -1.0, 1.0)

    def spins(self, rows):
        return np.where(self.neg[rows], -1.0, 1.0)

    def update(self, x):
        neg = x < 0
        changed = neg != self.neg
        cols = np.flatnonzero(changed.any(axis=0))
        self.counter += 1
        if cols.size == 0:
            return self.E
        self.neg = neg
        if self.incremental and cols.size < 0.5 * neg.shape[1] and self.counter % FULL_REFRESH:
            D = np.where(changed[:, cols], np.where(neg[:, cols], -2.0, 2.0), 0.0)
            H_old = self.H[:, cols]
            self.H = self.H + D @ self.JT[cols]
            self.E = self.E + 0.5 * np.einsum("ij,ij->i", D, H_old + self.H[:, cols])
        else:
            self._refresh()
        return self.E


def _simulate_chunk(variant, J, sched, x, e, y, *, noise=None, noise_rngs=None, clamp=True,
                    track_energy=True, checkpoints=(), energy_window=None,
                    sbm_xi_scale=DSBM_XI_SCALE, raise_on_divergence=False):
    batch, n = x.shape
    names = VARIANT_PARAMS[variant]
    table = {name: sched.values(name) for name in names}
    dt = sched.dt
    alive = np.ones(batch, dtype=bool)
    diverged_at = np.full(batch, -1, dtype=np.int64)
    checkpoints = sorted(set(int(c) for c in checkpoints))
    snaps = {}
    if 0 in checkpoints:
        snaps[0] = x.copy()

    tracker = _EnergyTracker(J, x) if track_energy else None
    if tracker is not None:
        best = tracker.E.copy()
        best_cfg = tracker.S.copy()
        first_hit = np.zeros(batch, dtype=np.int64)
    w0, w1 = energy_window if energy_window is not None else (0, -1)
    e_sum = np.zeros(batch)
    e_cnt = 0
    if tracker is not None and w0 <= 0 < w1:
        e_sum += tracker.E
        e_cnt += 1

    block = None
    for k in range(sched.n_steps):
        vals = {name: table[name][k] for name in names}
        with np.errstate(over="ignore", invalid="ignore"):
            if noise is None:
                if variant == "dsbm" and tracker is not None and np.all(x != 0):
                    # readout spins equal sign0(x) here, so the tracked fields are reusable
                    fld = (sbm_xi_scale * J.xi) * tracker.H
                else:
                    fld = coupling_field(variant, J, x, sbm_xi_scale)
                x, e, y = advance(variant, x, e, y, fld, vals, dt, clamp)
            else:
                j = k % NOISE_BLOCK
                if j == 0:
                    width = min(NOISE_BLOCK, sched.n_steps - k)
                    block = np.stack([r.standard_normal((width, _sde.DRAWS_PER_SPIN * n))
                                      for r in noise_rngs])
                x, e = _sde.sde_advance(variant, x, e, J, vals, dt, noise, block[:, j], clamp)

            bad = ~np.isfinite(x).all(axis=1)
            if e is not None:
                bad |= ~np.isfinite(e).all(axis=1)
            if y is not None:
                bad |= ~np.isfinite(y).all(axis=1)
        new_bad = bad & alive
        if np.any(new_bad) or not np.all(alive):
            if np.any(new_bad) and raise_on_divergence:
                raise NumericalDivergence(k, variant)
            diverged_at[new_bad] = k
            alive &= ~bad
            x = np.where(alive[:, None], x, 0.0)
            if e is not None:
                e = np.where(alive[:, None], e, 0.0)
            if y is not None:
                y = np.where(alive[:, None], y, 0.0)

        if tracker is not None:
            E = tracker.update(x)
            improved = (E < best) & alive
            if np.any(improved):
                best[improved] = E[improved]
                best_cfg[improved] = tracker.spins(improved)
                first_hit[improved] = k + 1
            if w0 <= k + 1 < w1:
                e_sum += E
                e_cnt += 1
        if k + 1 in checkpoints:
            snaps[k + 1] = x.copy()

    final_S = spins_from_amplitudes(x)
    if tracker is not None:
        final_E = tracker.E.copy()
    else:
        final_E = 0.5 * np.sum(final_S * J.local_fields(final_S), axis=1)
        best = final_E.copy()
        best_cfg = final_S
        first_hit = np.full(batch, sched.n_steps, dtype=np.int64)
    dead = ~alive
    best[dead] = np.inf
    final_E[dead] = np.inf
    mean_E = e_sum / e_cnt if e_cnt else None
    return dict(best=best, first_hit=first_hit, final_E=final_E, best_cfg=best_cfg,
                x=x, e=e, y=y, diverged_at=diverged_at, mean_E=mean_E, snaps=snaps)


def _chunk_job(variant, J, sched, indices, seed, key, noise, x0, init_std, kwargs):
    n = J.n
    xs, es, ys, nrngs = [], [], [], []
    for idx in indices:
        rng = np.random.Generator(np.random.PCG64(trajectory_seed(seed, key, idx, 0)))
        x, e, y = initial_state(variant, n, rng, init_std)
        if x0 is not None:
            x = np.array(x0[idx], dtype=np.float64)
        xs.append(x)
        es.append(e)
        ys.append(y)
        if noise is not None:
            nseed = seed if noise.rng_seed is None else noise.rng_seed
            nrngs.append(np.random.Generator(np.random.PCG64(trajectory_seed(nseed, key, idx, 1))))
    x = np.stack(xs)
    e = np.stack(es) if es[0] is not None else None
    y = np.stack(ys) if ys[0] is not None else None
    return _simulate_chunk(variant, J, sched, x, e, y, noise=noise, noise_rngs=nrngs, **kwargs)


def run_batch(variant: str, J, schedule: ScheduleParams, n_trajectories: int, seed: int = 0, *,
              instance_id=None, noise=None, clamp: bool = True, track_energy: bool = True,
              checkpoints=(), energy_window=None, x0=None, init_std=None,
              sbm_xi_scale: float = DSBM_XI_SCALE, chunk_size: int = 64, n_jobs: int = 1,
              raise_on_divergence: bool = False) -> BatchRun:
    """Simulate ``n_trajectories`` independent trajectories of one solver.

    Parameters
    ----------
    variant : {"cac", "cfc", "sfc", "linear", "tanh", "dsbm"}
    J : CouplingMatrix or array-like
    schedule : ScheduleParams
        Must define every parameter the variant uses.
    seed : int
        Master seed. Trajectory ``i`` uses a stream derived from
        ``(seed, instance_id, i)``.
    noise : NoiseParams, optional
        Switches CAC/CFC/SFC to the truncated-Wigner SDE.
    track_energy : bool
        Evaluate the Ising energy of ``sign(x)`` after every step (best energy
        during the run). When False only the final state is read out.
    checkpoints : iterable of int
        Steps at which to store ``x`` (0 is the initial condition).
    energy_window : (start, stop), optional
        Average the per-step energy over steps in ``[start, stop)``.
    x0 : array of shape (n_trajectories, n), optional
        Explicit initial amplitudes (error variables keep their defaults).
    """
    check_variant(variant)
    J = as_coupling(J)
    missing = [p for p in VARIANT_PARAMS[variant] if p not in schedule.params]
    if missing:
        raise ValueError(f"schedule lacks parameters {missing} required by {variant}")
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    if noise is not None and variant not in _sde.SDE_VARIANTS:
        raise ValueError(f"no stochastic version of {variant}")
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (n_trajectories, J.n):
            raise ValueError(f"x0 must have shape {(n_trajectories, J.n)}")
    key = J.name if instance_id is None else instance_id
    kwargs = dict(clamp=clamp, track_energy=track_energy, checkpoints=tuple(checkpoints),
                  energy_window=energy_window, sbm_xi_scale=sbm_xi_scale,
                  raise_on_divergence=raise_on_divergence)
    chunks = [range(s, min(s + chunk_size, n_trajectories))
              for s in range(0, n_trajectories, chunk_size)]
    jobs = (delayed(_chunk_job)(variant, J, schedule, c, seed, key, noise, x0, init_std, kwargs)
            for c in chunks)
    if n_jobs == 1 or len(chunks) == 1:
        parts = [_chunk_job(variant, J, schedule, c, seed, key, noise, x0, init_std, kwargs)
                 for c in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs, prefer="threads")(jobs)

    def cat(name):
        return np.concatenate([p[name] for p in parts])

    snaps = {}
    for step in parts[0]["snaps"]:
        snaps[step] = np.concatenate([p["snaps"][step] for p in parts])
    mean_E = cat("mean_E") if parts[0]["mean_E"] is not None else None
    return BatchRun(
        variant=variant,
        instance_id=str(key),
        schedule=schedule,
        best_energy=cat("best"),
        first_hit=cat("first_hit"),
        final_energy=cat("final_E"),
        best_config=cat("best_cfg"),
        final_x=cat("x"),
        diverged_at=cat("diverged_at"),
        mean_energy=mean_E,
        snapshots=snaps,
    )


def run_trajectory(variant: str, J, schedule: ScheduleParams, init_seed: int, *,
                   noise=None, clamp=True, track_energy=True, checkpoints=(), x0=None,
                   init_std=None, sbm_xi_scale=DSBM_XI_SCALE) -> Trajectory:
    """Run one trajectory; raises :class:`NumericalDivergence` on a non-finite amplitude."""
    check_variant(variant)
    J = as_coupling(J)
    rng = np.random.Generator(np.random.PCG64(trajectory_seed(init_seed, J.name, 0, 0)))
    x, e, y = initial_state(variant, J.n, rng, init_std)
    if x0 is not None:
        x = np.array(x0, dtype=np.float64).reshape(J.n)
    nrngs = None
    if noise is not None:
        nseed = init_seed if noise.rng_seed is None else noise.rng_seed
        nrngs = [np.random.Generator(np.random.PCG64(trajectory_seed(nseed, J.name, 0, 1)))]
    out = _simulate_chunk(
        variant, J, schedule, x[None], None if e is None else e[None], None if y is None else y[None],
        noise=noise, noise_rngs=nrngs, clamp=clamp, track_energy=track_energy,
        checkpoints=checkpoints, sbm_xi_scale=sbm_xi_scale, raise_on_divergence=True,
    )
    best = float(out["best"][0])
    final = float(out["final_E"][0])
    state = SolverState(
        x=out["x"][0],
        e=None if out["e"] is None else out["e"][0],
        y=None if out["y"] is None else out["y"][0],
        step=schedule.n_steps,
        best_energy=best,
        best_config=out["best_cfg"][0],
    )
    return Trajectory(
        final_state=state,
        best_energy=best,
        first_hit_step=int(out["first_hit"][0]),
        final_energy=final,
        final_attains_best=final <= best,
        best_config=out["best_cfg"][0],
        snapshots={k: v[0] for k, v in out["snaps"].items()},
    )
