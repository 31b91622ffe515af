"""Success probability, time-to-solution and the other benchmark statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .instances import as_coupling
from .solvers.runner import BatchRun, run_batch
from .solvers.schedule import ScheduleParams

HIT_RTOL = 1e-9


class MetricsError(ValueError):
    pass


def hit_threshold(target: float) -> float:
    return target + HIT_RTOL * max(1.0, abs(target))


@dataclass(frozen=True)
class BatchResult:
    """Per-trajectory outcomes of one solver on one instance, scored against a target."""

    instance_id: str
    best_energies: np.ndarray
    first_hit: np.ndarray
    final_hits: np.ndarray
    target: float
    steps: int

    def __post_init__(self):
        b = np.asarray(self.best_energies, dtype=np.float64)
        f = np.asarray(self.first_hit, dtype=np.int64)
        h = np.asarray(self.final_hits, dtype=bool)
        if not (b.shape == f.shape == h.shape) or b.ndim != 1:
            raise MetricsError("per-trajectory arrays must be 1-d and equally long")
        if self.steps < 1:
            raise MetricsError("steps must be >= 1")
        object.__setattr__(self, "best_energies", b)
        object.__setattr__(self, "first_hit", f)
        object.__setattr__(self, "final_hits", h)

    @property
    def n_trajectories(self) -> int:
        return self.best_energies.size

    @property
    def hits(self) -> np.ndarray:
        return self.best_energies <= hit_threshold(self.target)

    @classmethod
    def from_run(cls, run: BatchRun, target: float) -> "BatchResult":
        final_hits = run.final_energy <= hit_threshold(target)
        return cls(run.instance_id, run.best_energy, run.first_hit, final_hits,
                   float(target), run.schedule.n_steps)


@dataclass(frozen=True)
class TtsReport:
    ps: float
    tts_steps: float
    mvm_to_solution: float


def success_probability(batch: BatchResult) -> float:
    if batch.n_trajectories == 0:
        raise MetricsError("empty batch")
    return float(np.mean(batch.hits))


def tts(ps: float, steps: float) -> float:
    """Steps needed to reach the target with 99% probability under restarts."""
    if not steps > 0:
        raise MetricsError(f"steps must be positive, got {steps}")
    if not 0.0 <= ps <= 1.0:
        raise MetricsError(f"ps must lie in [0, 1], got {ps}")
    if ps == 0.0:
        return math.inf
    if ps >= 0.99:
        return float(steps)
    return steps * math.log(0.01) / math.log1p(-ps)


def mvm_to_solution(report: TtsReport) -> float:
    # one coupling MVM per integration step
    return report.tts_steps


def tts_report(batch: BatchResult) -> TtsReport:
    ps = success_probability(batch)
    t = tts(ps, batch.steps)
    return TtsReport(ps, t, t)


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    if total < 1:
        raise MetricsError("total must be >= 1")
    phat = successes / total
    denom = 1.0 + z * z / total
    centre = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def percentiles(values, qs) -> list[float]:
    """Linear-interpolation quantiles (``qs`` in [0, 1]); +inf sorts last."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise MetricsError("percentiles of an empty set")
    if np.any(np.isnan(v)):
        raise MetricsError("NaN in percentile input")
    out = []
    for q in np.atleast_1d(qs):
        if not 0.0 <= q <= 1.0:
            raise MetricsError(f"quantile {q} outside [0, 1]")
        h = (v.size - 1) * q
        lo = int(math.floor(h))
        hi = min(lo + 1, v.size - 1)
        frac = h - lo
        if frac == 0.0 or v[lo] == v[hi]:
            out.append(float(v[lo]))
        elif math.isinf(v[hi]):
            out.append(math.inf)
        else:
            out.append(float(v[lo] + frac * (v[hi] - v[lo])))
    return out


def median(values) -> float:
    return percentiles(values, [0.5])[0]


def scaling_fit(points, return_r2: bool = False):
    """Least-squares fit of ``log tts = log A + sqrt(n) log B``; returns ``(A, B)``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise MetricsError("need at least two (n, tts) points")
    n, t = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise MetricsError("tts values must be finite and positive")
    s = np.sqrt(n)
    if np.ptp(s) == 0:
        raise MetricsError("degenerate fit: all points share the same n")
    y = np.log(t)
    X = np.column_stack([np.ones_like(s), s])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    A, B = float(np.exp(coef[0])), float(np.exp(coef[1]))
    if not return_r2:
        return A, B
    resid = y - X @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return A, B, float(r2)


@dataclass(frozen=True)
class LognormalFit:
    mu: float
    sigma: float
    n_used: int
    n_excluded: int

    def unsolved_curve(self, m, n_total: int | None = None) -> np.ndarray:
        """Expected number of instances with TTS above each value of ``m``."""
        total = self.n_used + self.n_excluded if n_total is None else n_total
        m = np.asarray(m, dtype=np.float64)
        if self.sigma == 0:
            surv = (np.log(m) < self.mu).astype(float)
        else:
            surv = stats.norm.sf(np.log(m), loc=self.mu, scale=self.sigma)
        return total * surv


def lognormal_fit(tts_values) -> LognormalFit:
    t = np.asarray(tts_values, dtype=np.float64).ravel()
    finite = np.isfinite(t)
    excluded = int(np.count_nonzero(~finite))
    t = t[finite]
    if t.size == 0:
        raise MetricsError("no finite values to fit")
    if np.any(t <= 0):
        raise MetricsError("log-normal fit needs positive values")
    lt = np.log(t)
    return LognormalFit(float(lt.mean()), float(lt.std()), int(t.size), excluded)


def empirical_unsolved(tts_values, m) -> np.ndarray:
    t = np.asarray(tts_values, dtype=np.float64)
    return np.array([np.count_nonzero(t > v) for v in np.atleast_1d(m)])


def final_state_ground_fraction(batch: BatchResult) -> float:
    hits = batch.hits
    n_hit = int(np.count_nonzero(hits))
    if n_hit == 0:
        raise MetricsError("no successful trajectories; fraction undefined")
    return float(np.count_nonzero(batch.final_hits & hits) / n_hit)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.std(a) == 0 or np.std(b) == 0:
        return math.nan
    return float(np.corrcoef(a, b)[0, 1])


def perturbation_correlation(variant, J, sched: ScheduleParams, seed: int, perturb_std: float,
                             checkpoints, init_std: float = 0.25) -> list[tuple[int, float]]:
    """Pearson r between two runs whose initial ``x`` differ by Gaussian noise.

    Undefined correlations (a constant ``x`` at a checkpoint) are reported as NaN.
    """
    if variant == "dsbm" or variant not in ("cac", "cfc", "sfc", "linear", "tanh"):
        raise MetricsError(f"perturbation_correlation needs a CIM variant, got {variant!r}")
    if not perturb_std > 0:
        raise MetricsError("perturb_std must be positive")
    J = as_coupling(J)
    cps = sorted(set(int(c) for c in checkpoints))
    if cps and (cps[0] < 0 or cps[-1] > sched.n_steps):
        raise MetricsError(f"checkpoints must lie in [0, {sched.n_steps}]")
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, init_std, J.n)
    x2 = x + rng.normal(0.0, perturb_std, J.n)
    run = run_batch(variant, J, sched, 2, seed, x0=np.stack([x, x2]), checkpoints=cps,
                    track_energy=False)
    out = []
    for c in cps:
        snap = run.snapshots[c]
        out.append((c, pearson(snap[0], snap[1])))
    return out


def residual_energy_predictor(p, alpha, beta):
    return (1.0 - np.asarray(p)) / (np.asarray(alpha) * np.asarray(beta))


def residual_energy_constant(samples, return_r2: bool = False):
    """Least-squares ``K`` (no intercept) in ``dE = K (1 - p) / (alpha beta)``.

    ``samples`` is a sequence of ``(p, alpha, beta, mean_dE)``.
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != 4 or s.shape[0] < 1:
        raise MetricsError("samples must be (p, alpha, beta, dE) rows")
    p, alpha, beta, dE = s.T
    if np.any(p >= 1) or np.any(alpha <= 0) or np.any(beta <= 0):
        raise MetricsError("need p < 1, alpha > 0 and beta > 0")
    x = residual_energy_predictor(p, alpha, beta)
    xx = float(x @ x)
    if xx == 0:
        raise MetricsError("degenerate predictor")
    K = float(x @ dE) / xx
    if not return_r2:
        return K
    ss_tot = float(np.sum((dE - dE.mean()) ** 2))
    ss_res = float(np.sum((dE - K * x) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return K, r2


def mean_residual_energy(J, ground_energy: float, p: float, alpha: float, beta: float, *,
                         n_steps: int = 2000, dt: float = 0.125, n_trajectories: int = 16,
                         seed: int = 0) -> float:
    """Mean excess Ising energy over the second half of a fixed-parameter CAC run."""
    sched = ScheduleParams(n_steps, dt, {"p": p, "alpha": alpha, "beta": beta})
    run = run_batch("cac", J, sched, n_trajectories, seed,
                    energy_window=(n_steps // 2, n_steps + 1))
    ok = np.isfinite(run.mean_energy)
    if not np.any(ok):
        raise MetricsError("every trajectory diverged")
    return float(np.mean(run.mean_energy[ok]) - ground_energy)


def soft_cost(x, p: float, c: float, J) -> float:
    """``sum_i (x_i^2/4 - (1-p)/2) x_i^2 + c sum_ij J_ij x_i x_j``."""
    J = as_coupling(J)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (J.n,):
        raise ValueError(f"x must have shape ({J.n},), got {x.shape}")
    x2 = x * x
    return float(np.sum((x2 / 4.0 - (1.0 - p) / 2.0) * x2) + c * (x @ J.local_fields(x)))


def soft_cost_grad(x, p: float, c: float, J) -> np.ndarray:
    J = as_coupling(J)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (J.n,):
        raise ValueError(f"x must have shape ({J.n},), got {x.shape}")
    A = J.entries
    return x ** 3 - (1.0 - p) * x + c * (A @ x + A.T @ x)
