"""Linear ramp / plateau parameter schedules and the shipped parameter presets."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

PARAM_NAMES = ("p", "alpha", "beta", "c", "k", "a")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleParams:
    """Per-run integration schedule.

    Every modulated scalar is stored as ``(start, end)``; fixed values have
    ``start == end``. Values ramp linearly over the first ``t_r`` steps and hold
    the end value for the remaining ``t_p`` steps. When ``t_r`` is omitted the
    ramp spans the whole run.
    """

    n_steps: int
    dt: float
    params: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    t_r: int | None = None
    t_p: int | None = None

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ScheduleError(f"n_steps must be a non-negative integer, got {self.n_steps}")
        if not self.dt > 0:
            raise ScheduleError(f"dt must be positive, got {self.dt}")
        norm = {}
        for name, val in dict(self.params).items():
            if name not in PARAM_NAMES:
                raise ScheduleError(f"unknown schedule parameter {name!r}")
            if np.ndim(val) == 0:
                val = (float(val), float(val))
            start, end = (float(v) for v in val)
            norm[name] = (start, end)
        object.__setattr__(self, "params", norm)

        t_r, t_p = self.t_r, self.t_p
        if t_r is None and t_p is None:
            t_r, t_p = self.n_steps, 0
        elif t_r is None:
            t_r = self.n_steps - t_p
        elif t_p is None:
            t_p = self.n_steps - t_r
        if t_r < 0 or t_p < 0 or t_r + t_p != self.n_steps:
            raise ScheduleError(
                f"t_r + t_p must equal n_steps ({t_r} + {t_p} != {self.n_steps})"
            )
        object.__setattr__(self, "t_r", int(t_r))
        object.__setattr__(self, "t_p", int(t_p))

        for name, lo in (("beta", 0.0), ("k", 0.0)):
            if name in norm and min(norm[name]) < lo:
                raise ScheduleError(f"{name} must be >= 0")
        if "alpha" in norm and min(norm["alpha"]) <= 0:
            raise ScheduleError("alpha must be > 0")

    def value(self, name: str, step: int) -> float:
        if name not in self.params:
            raise ScheduleError(f"schedule has no parameter {name!r}")
        if not 0 <= step < max(self.n_steps, 1):
            raise ScheduleError(f"step {step} outside [0, {self.n_steps})")
        start, end = self.params[name]
        if step >= self.t_r or start == end:
            return end
        return start + (end - start) * step / self.t_r

    def values(self, name: str) -> np.ndarray:
        """Vector of the parameter at every step (length ``n_steps``)."""
        if name not in self.params:
            raise ScheduleError(f"schedule has no parameter {name!r}")
        start, end = self.params[name]
        steps = np.arange(self.n_steps)
        if start == end or self.t_r == 0:
            return np.full(self.n_steps, end)
        out = start + (end - start) * steps / self.t_r
        out[steps >= self.t_r] = end
        return out

    def scaled(self, n_steps: int) -> "ScheduleParams":
        """Same schedule shape over ``n_steps`` steps (ramp/plateau split kept proportional)."""
        t_r = int(round(self.t_r * n_steps / self.n_steps)) if self.n_steps else n_steps
        return replace(self, n_steps=n_steps, t_r=t_r, t_p=n_steps - t_r)

    def with_params(self, **overrides) -> "ScheduleParams":
        params = dict(self.params)
        params.update(overrides)
        return replace(self, params=params)

    def as_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "dt": self.dt,
            "t_r": self.t_r,
            "t_p": self.t_p,
            **{name: list(v) for name, v in sorted(self.params.items())},
        }


def schedule_value(sched: ScheduleParams, name: str, step: int) -> float:
    return sched.value(name, step)


@dataclass(frozen=True)
class Preset:
    name: str
    variant: str
    schedule: ScheduleParams
    description: str = ""


def _p(name, variant, n_steps, dt, desc="", t_r=None, t_p=None, **params):
    return Preset(name, variant, ScheduleParams(n_steps, dt, params, t_r, t_p), desc)


_BASE = [
    # SK benchmark settings
    _p("cac-sk", "cac", 3200, 0.125, "CIM-CAC, SK instances", 2880, 320,
       p=(-1.0, 1.0), alpha=(1.0, 2.5), beta=0.8),
    _p("cfc-sk", "cfc", 1000, 0.4, "CIM-CFC, SK instances", 900, 100,
       p=(-1.0, 1.0), alpha=1.0, beta=0.2),
    _p("sfc-sk", "sfc", 500, 0.4, "CIM-SFC, SK instances",
       p=(-1.0, 1.0), c=(1.0, 3.0), beta=(0.3, 0.1), k=0.2),
    _p("dsbm-sk", "dsbm", 2000, 1.25, "dSBM, SK instances", c=0.5, a=(0.0, 1.0)),
    _p("cac-n1200", "cac", 8000, 0.125, "CIM-CAC, 1200-spin SK instances", 7200, 800,
       p=(-1.0, 1.0), alpha=(1.0, 2.5), beta=0.8),
    _p("dsbm-n1200", "dsbm", 4000, 1.25, "dSBM, 1200-spin SK instances", c=0.5, a=(0.0, 1.0)),
    # fixed-parameter trajectory demonstrations
    _p("sfc-fixed", "sfc", 4000, 0.4, "CIM-SFC, fixed parameters",
       p=-1.0, c=2.0, beta=0.3, k=0.2),
    _p("cfc-fixed", "cfc", 1000, 0.4, "CIM-CFC, fixed parameters",
       p=-1.0, alpha=2.0, beta=0.2),
    _p("sfc-ramp", "sfc", 500, 0.4, "CIM-SFC, modulated parameters",
       p=(-1.0, 1.0), c=(1.0, 3.0), beta=(0.3, 0.1), k=0.2),
    _p("cfc-ramp", "cfc", 1000, 0.4, "CIM-CFC, modulated parameters", 900, 100,
       p=(-1.0, 1.0), alpha=1.0, beta=0.2),
    # feedback baselines without error variables
    _p("linear-baseline", "linear", 1000, 0.05, "linear-feedback CIM", p=1.5),
    _p("tanh-baseline", "tanh", 1000, 0.05, "tanh-filtered feedback CIM", p=1.5, c=1.0),
]

# (instances, graph type, n, p, n_steps, dt, t_r, t_p)
_CAC_GSET = [
    ((1, 5), "random {+1}", 800, (-0.5, 1.0), 6666, 0.075, 6000, 666),
    ((6, 10), "random {+1,-1}", 800, (-0.5, 1.0), 6666, 0.075, 6000, 666),
    ((11, 13), "toroidal {+1,-1}", 800, -4.0, 5000, 0.1, 4500, 500),
    ((14, 17), "planar {+1}", 800, -1.0, 20000, 0.05, 18000, 2000),
    ((18, 21), "planar {+1,-1}", 800, -1.0, 20000, 0.05, 18000, 2000),
    ((43, 46), "random {+1}", 1000, (-0.5, 1.0), 10000, 0.1, 9000, 1000),
    ((51, 54), "planar {+1}", 1000, -1.0, 20000, 0.05, 18000, 2000),
    ((22, 26), "random {+1}", 2000, (-0.5, 1.0), 20000, 0.1, 19000, 1000),
    ((27, 31), "random {+1,-1}", 2000, (-0.5, 1.0), 20000, 0.1, 19000, 1000),
    ((32, 34), "toroidal {+1,-1}", 2000, (-4.0, -3.0), 20000, 0.1, 19000, 1000),
    ((35, 38), "planar {+1}", 2000, (-1.0, -0.5), 80000, 0.05, 78000, 2000),
    ((39, 42), "planar {+1}", 2000, (-1.0, -0.5), 80000, 0.05, 78000, 2000),
]

_CFC_GSET = [
    ((1, 5), "random {+1}", 800, (-1.0, 1.0), 4000, 0.125, 3600, 400),
    ((6, 10), "random {+1,-1}", 800, (-1.0, 1.0), 2000, 0.25, 1800, 200),
    ((11, 13), "toroidal {+1,-1}", 800, (-3.0, -1.0), 2000, 0.25, 1800, 200),
    ((14, 17), "planar {+1}", 800, (-2.0, 0.0), 8000, 0.125, 7200, 800),
    ((18, 21), "planar {+1,-1}", 800, (-2.0, 0.0), 4000, 0.25, 3600, 400),
    ((43, 46), "random {+1}", 1000, (-1.0, 1.0), 5000, 0.2, 4500, 500),
    ((51, 54), "planar {+1}", 1000, (-2.0, 0.0), 16000, 0.125, 15200, 800),
    ((22, 26), "random {+1}", 2000, (-1.0, 1.0), 10000, 0.2, 9500, 500),
    ((27, 31), "random {+1,-1}", 2000, (-1.0, 1.0), 10000, 0.2, 9500, 500),
    ((32, 34), "toroidal {+1,-1}", 2000, (-3.0, -1.0), 40000, 0.1, 39000, 1000),
    ((35, 38), "planar {+1}", 2000, (-2.0, 0.0), 80000, 0.05, 78000, 2000),
    ((39, 42), "planar {+1}", 2000, (-2.0, 0.0), 40000, 0.1, 39000, 1000),
]

# (instances, graph type, n, c, beta, k, n_steps, dt)
_SFC_GSET = [
    ((1, 5), "random {+1}", 800, (1.0, 3.0), (0.3, 0.0), 0.2, 2666, 0.15),
    ((6, 10), "random {+1,-1}", 800, (1.0, 3.0), (0.3, 0.0), 0.2, 500, 0.4),
    ((11, 13), "toroidal {+1,-1}", 800, 1.4, (0.05, 0.0), 0.32, 2500, 0.4),
    ((43, 46), "random {+1}", 1000, (1.4, 4.2), (0.2, 0.0), 0.2, 5000, 0.2),
]


def _gset_presets():
    out = []
    for (lo, hi), kind, n, p, n_steps, dt, t_r, t_p in _CAC_GSET:
        out.append(_p(f"cac-gset-g{lo}-{hi}", "cac", n_steps, dt,
                      f"CIM-CAC, G-set {kind}, N={n}", t_r, t_p,
                      p=p, alpha=(1.0, 3.0), beta=0.3))
    for (lo, hi), kind, n, p, n_steps, dt, t_r, t_p in _CFC_GSET:
        out.append(_p(f"cfc-gset-g{lo}-{hi}", "cfc", n_steps, dt,
                      f"CIM-CFC, G-set {kind}, N={n}", t_r, t_p,
                      p=p, alpha=1.0, beta=0.15))
    for (lo, hi), kind, n, c, beta, k, n_steps, dt in _SFC_GSET:
        out.append(_p(f"sfc-gset-g{lo}-{hi}", "sfc", n_steps, dt,
                      f"CIM-SFC, G-set {kind}, N={n}",
                      p=(-1.0, 1.0), c=c, beta=beta, k=k))
    return out


PRESETS: dict[str, Preset] = {pr.name: pr for pr in _BASE + _gset_presets()}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; see list_presets()") from None


def gset_preset(variant: str, instance: int | str) -> Preset:
    """Preset for G-set graph ``G<instance>`` (e.g. ``gset_preset("cac", 11)``)."""
    num = int(str(instance).lstrip("Gg"))
    for pr in PRESETS.values():
        if pr.variant == variant and pr.name.startswith(f"{variant}-gset-g"):
            lo, hi = (int(v) for v in pr.name.rsplit("-g", 1)[1].split("-"))
            if lo <= num <= hi:
                return pr
    raise KeyError(f"no {variant} G-set preset covers G{num}")


def list_presets() -> list[dict]:
    return [
        {"name": pr.name, "variant": pr.variant, "description": pr.description,
         **pr.schedule.as_dict()}
        for pr in PRESETS.values()
    ]
