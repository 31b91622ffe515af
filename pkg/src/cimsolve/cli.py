"""Config-driven benchmark runner.

A run is described by a TOML file plus ``--set key.path=value`` overrides::

    seed = 0
    trajectories = 200
    workers = 1

    [instance]              # or [[instances]]
    kind = "sk"             # sk | gset | matrix | toroidal | random-graph
    n = 100
    seeds = [1, 2, 3]

    [[solvers]]
    preset = "cfc-sk"
    n_steps = 500           # rescales the preset schedule

    [output]
    path = "out.jsonl"
    format = "json"         # json (JSON lines) | csv

Timestamps and worker counts are kept out of the result payload so re-runs
are byte-identical.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import re
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .energy import EnergyParams, energy_report, optimal_g_sq
from .instances import (
    CouplingMatrix,
    InstanceError,
    MAX_BRUTE_FORCE_N,
    brute_force_ground,
    load_gset,
    random_graph,
    sk_random,
    toroidal_grid,
)
from .metrics import (
    BatchResult,
    MetricsError,
    median,
    percentiles,
    perturbation_correlation,
    scaling_fit,
    tts_report,
    wilson_interval,
)
from .sde import SDE_VARIANTS, NoiseParams
from .solvers.dynamics import VARIANT_PARAMS, VARIANTS
from .solvers.runner import run_batch
from .solvers.schedule import PARAM_NAMES, PRESETS, ScheduleError, ScheduleParams, list_presets

COMMANDS = ("solve", "bench", "scale", "noise-sweep", "chaos", "energy", "presets")
EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 1, 2
BRUTE_FORCE_DEFAULT_N = 20


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# --------------------------------------------------------------------------- #
# config loading
# --------------------------------------------------------------------------- #
def parse_value(text: str):
    """Parse an override value as a TOML value, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError("--set", f"expected key.path=value, got {assignment!r}")
    key, _, raw = assignment.partition("=")
    # "solvers[0].dt" and "solvers.0.dt" address the same field
    parts = re.sub(r"\[(\d+)\]", r".\1", key.strip()).split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        nxt = node.get(part) if isinstance(node, dict) else None
        if isinstance(node, list):
            try:
                nxt = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(".".join(parts[:i + 1]), "no such list element") from None
        elif nxt is None:
            nxt = node[part] = {}
        if not isinstance(nxt, (dict, list)):
            raise ConfigError(".".join(parts[:i + 1]), "is not a table")
        node = nxt
    if isinstance(node, list):
        node[int(parts[-1])] = parse_value(raw.strip())
    else:
        node[parts[-1]] = parse_value(raw.strip())


def load_config(path: str | None, overrides=()) -> dict:
    cfg = {}
    if path is not None:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        apply_override(cfg, item)
    return cfg


def _get(cfg: dict, key: str, path: str, kind, default=None, minimum=None):
    val = cfg.get(key, default)
    where = f"{path}{key}"
    if val is None:
        return None
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(where, f"expected an integer, got {val!r}")
    elif kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(where, f"expected a number, got {val!r}")
        val = float(val)
    elif kind is str and not isinstance(val, str):
        raise ConfigError(where, f"expected a string, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(where, f"must be >= {minimum}, got {val}")
    return val


def _as_list(val):
    if val is None:
        return []
    return val if isinstance(val, list) else [val]


# --------------------------------------------------------------------------- #
# instances
# --------------------------------------------------------------------------- #
def resolve_instances(cfg: dict, base: Path | None = None):
    """Return a list of ``(instance_id, CouplingMatrix)``."""
    specs = cfg.get("instances")
    if specs is None:
        specs = [cfg["instance"]] if "instance" in cfg else []
        prefix = "instance"
    else:
        prefix = "instances"
    if not specs:
        raise ConfigError("instance", "no instance given")
    out = []
    for i, spec in enumerate(_as_list(specs)):
        path = prefix if prefix == "instance" else f"instances[{i}]"
        if not isinstance(spec, dict):
            raise ConfigError(path, "expected a table")
        kind = _get(spec, "kind", f"{path}.", str, "sk")
        seeds = spec.get("seeds", [spec.get("seed", 0)])
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
            raise ConfigError(f"{path}.seeds", "expected a list of integers")
        if kind == "sk":
            sizes = spec.get("sizes", [spec.get("n")])
            for n in sizes:
                if isinstance(n, bool) or not isinstance(n, int) or n < 2:
                    raise ConfigError(f"{path}.n", f"SK size must be an integer >= 2, got {n!r}")
                for s in seeds:
                    J = sk_random(n, s)
                    out.append((J.name, J))
        elif kind == "gset":
            files = _as_list(spec.get("path"))
            if not files:
                raise ConfigError(f"{path}.path", "required for kind 'gset'")
            for f in files:
                fp = Path(f)
                if base is not None and not fp.is_absolute():
                    fp = base / fp
                J = load_gset(fp)
                out.append((J.name, J))
        elif kind == "matrix":
            rows = spec.get("couplings")
            try:
                J = CouplingMatrix(np.asarray(rows, dtype=np.float64),
                                   name=spec.get("name", f"matrix-{i}"))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}.couplings", str(exc)) from None
            out.append((J.name, J))
        elif kind == "toroidal":
            rows = _get(spec, "rows", f"{path}.", int, minimum=3)
            cols = _get(spec, "cols", f"{path}.", int, minimum=3)
            if rows is None or cols is None:
                raise ConfigError(path, "toroidal needs rows and cols")
            for s in seeds:
                J = toroidal_grid(rows, cols, s, signed=spec.get("signed", True))
                out.append((J.name, J))
        elif kind == "random-graph":
            n = _get(spec, "n", f"{path}.", int, minimum=2)
            m = _get(spec, "edges", f"{path}.", int, minimum=1)
            if n is None or m is None:
                raise ConfigError(path, "random-graph needs n and edges")
            for s in seeds:
                J = random_graph(n, m, s, signed=spec.get("signed", False))
                out.append((J.name, J))
        else:
            raise ConfigError(f"{path}.kind", f"unknown instance kind {kind!r}")
    return out


# --------------------------------------------------------------------------- #
# solvers
# --------------------------------------------------------------------------- #
def resolve_solver(spec: dict, path: str) -> tuple[str, str, ScheduleParams, dict]:
    """Return ``(label, variant, schedule, extra run kwargs)`` for one solver table."""
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected a table")
    preset_name = spec.get("preset")
    variant = spec.get("variant")
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"{path}.preset", f"unknown preset {preset_name!r}")
        preset = PRESETS[preset_name]
        if variant is not None and variant != preset.variant:
            raise ConfigError(f"{path}.variant", f"preset {preset_name!r} is {preset.variant}")
        variant = preset.variant
        sched = preset.schedule
    else:
        if variant not in VARIANTS:
            raise ConfigError(f"{path}.variant", f"expected one of {VARIANTS}, got {variant!r}")
        n_steps = _get(spec, "n_steps", f"{path}.", int, minimum=0)
        dt = _get(spec, "dt", f"{path}.", float)
        if n_steps is None or dt is None:
            raise ConfigError(path, "n_steps and dt are required without a preset")
        sched = None
    try:
        params = {}
        for name in PARAM_NAMES:
            if name in spec:
                val = spec[name]
                if isinstance(val, list) and len(val) != 2:
                    raise ConfigError(f"{path}.{name}", "expected a number or [start, end]")
                params[name] = tuple(val) if isinstance(val, list) else val
        if sched is None:
            sched = ScheduleParams(spec["n_steps"], float(spec["dt"]), params,
                                   spec.get("t_r"), spec.get("t_p"))
        else:
            if "n_steps" in spec:
                sched = sched.scaled(_get(spec, "n_steps", f"{path}.", int, minimum=0))
            if "dt" in spec:
                sched = ScheduleParams(sched.n_steps, _get(spec, "dt", f"{path}.", float),
                                       sched.params, sched.t_r, sched.t_p)
            if params:
                sched = sched.with_params(**params)
            if "t_r" in spec or "t_p" in spec:
                sched = ScheduleParams(sched.n_steps, sched.dt, sched.params,
                                       spec.get("t_r"), spec.get("t_p"))
    except ScheduleError as exc:
        raise ConfigError(path, str(exc)) from None
    missing = [p for p in VARIANT_PARAMS[variant] if p not in sched.params]
    if missing:
        raise ConfigError(path, f"missing parameters {missing} for {variant}")
    extra = {}
    if "clamp" in spec:
        if not isinstance(spec["clamp"], bool):
            raise ConfigError(f"{path}.clamp", "expected true or false")
        extra["clamp"] = spec["clamp"]
    if "sbm_xi_scale" in spec:
        extra["sbm_xi_scale"] = _get(spec, "sbm_xi_scale", f"{path}.", float)
    if "track_energy" in spec:
        extra["track_energy"] = bool(spec["track_energy"])
    label = spec.get("label", preset_name or variant)
    return label, variant, sched, extra


def resolve_solvers(cfg: dict):
    specs = cfg.get("solvers")
    if specs is None:
        if "solver" not in cfg:
            raise ConfigError("solver", "no solver given")
        return [resolve_solver(cfg["solver"], "solver")]
    return [resolve_solver(s, f"solvers[{i}]") for i, s in enumerate(_as_list(specs))]


def common_settings(cfg: dict) -> dict:
    trajectories = _get(cfg, "trajectories", "", int, 100)
    if trajectories < 1:
        raise ConfigError("trajectories", f"must be >= 1, got {trajectories}")
    seed = _get(cfg, "seed", "", int, 0, minimum=0)
    workers = _get(cfg, "workers", "", int, 1, minimum=1)
    chunk = _get(cfg, "chunk_size", "", int, 64, minimum=1)
    return {"trajectories": trajectories, "seed": seed, "workers": workers, "chunk_size": chunk}


def noise_settings(cfg: dict):
    noise = cfg.get("noise")
    if noise is None:
        return None
    if not isinstance(noise, dict):
        raise ConfigError("noise", "expected a table")
    grid = noise.get("g_sq")
    grid = _as_list(grid)
    if not grid:
        raise ConfigError("noise.g_sq", "need at least one value")
    for i, g in enumerate(grid):
        if isinstance(g, bool) or not isinstance(g, (int, float)) or not g > 0:
            raise ConfigError(f"noise.g_sq[{i}]", f"must be a positive number, got {g!r}")
    r_b = _get(noise, "r_b", "noise.", float, 0.1)
    if not 0 < r_b <= 1:
        raise ConfigError("noise.r_b", f"must lie in (0, 1], got {r_b}")
    seed = _get(noise, "seed", "noise.", int, None, minimum=0)
    return [float(g) for g in grid], r_b, seed


def energy_params(cfg: dict) -> EnergyParams:
    sec = cfg.get("energy", {})
    if not isinstance(sec, dict):
        raise ConfigError("energy", "expected a table")
    fields = EnergyParams.__dataclass_fields__
    kw = {}
    for key, val in sec.items():
        if key in ("mvm", "n", "g_sq_grid"):
            continue
        if key not in fields:
            raise ConfigError(f"energy.{key}", "unknown energy parameter")
        kw[key] = _get(sec, key, "energy.", float)
    try:
        return EnergyParams(**kw)
    except ValueError as exc:
        raise ConfigError("energy", str(exc)) from None


# --------------------------------------------------------------------------- #
# shared evaluation
# --------------------------------------------------------------------------- #
def _clean(val):
    if isinstance(val, float):
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        if math.isnan(val):
            return "nan"
        return val
    if isinstance(val, (np.floating,)):
        return _clean(float(val))
    if isinstance(val, (np.integer,)):
        return int(val)
    if isinstance(val, dict):
        return {k: _clean(v) for k, v in val.items()}
    if isinstance(val, (list, tuple)):
        return [_clean(v) for v in val]
    return val


def _target_mode(cfg: dict):
    t = cfg.get("target", "auto")
    if isinstance(t, (int, float)) and not isinstance(t, bool):
        return float(t)
    if t not in ("auto", "brute", "best"):
        raise ConfigError("target", f"expected auto, brute, best or a number, got {t!r}")
    return t


def _run_all(instances, solvers, settings, noise=None):
    runs = {}
    for iid, J in instances:
        for label, variant, sched, extra in solvers:
            if noise is not None and variant not in SDE_VARIANTS:
                raise ConfigError("noise", f"no stochastic version of {variant}")
            runs[(iid, label)] = run_batch(
                variant, J, sched, settings["trajectories"], settings["seed"], instance_id=iid,
                noise=noise, n_jobs=settings["workers"], chunk_size=settings["chunk_size"],
                **extra,
            )
    return runs


def _targets(instances, runs, mode):
    targets = {}
    for iid, J in instances:
        if isinstance(mode, float):
            targets[iid] = mode
            continue
        use_brute = mode == "brute" or (mode == "auto" and J.n <= BRUTE_FORCE_DEFAULT_N)
        if use_brute:
            if J.n > MAX_BRUTE_FORCE_N:
                raise ConfigError("target", f"brute force limited to n <= {MAX_BRUTE_FORCE_N}")
            targets[iid] = brute_force_ground(J).energy
        else:
            best = [float(np.min(r.best_energy)) for (i, _), r in runs.items() if i == iid]
            targets[iid] = min(best)
    return targets


def _row(command, iid, J, label, variant, sched, extra, settings, run, target, **more):
    batch = BatchResult.from_run(run, target)
    rep = tts_report(batch)
    n_hit = int(np.count_nonzero(batch.hits))
    lo, hi = wilson_interval(n_hit, batch.n_trajectories)
    finite = run.best_energy[np.isfinite(run.best_energy)]
    row = {
        "command": command,
        "instance": iid,
        "n": J.n,
        "solver": label,
        "variant": variant,
        "schedule": sched.as_dict(),
        "options": dict(sorted(extra.items())),
        "trajectories": settings["trajectories"],
        "seed": settings["seed"],
        "target_energy": target,
        "best_energy": float(finite.min()) if finite.size else math.inf,
        "ps": rep.ps,
        "ps_low": lo,
        "ps_high": hi,
        "tts_steps": rep.tts_steps,
        "mvm": rep.mvm_to_solution,
        "n_diverged": run.n_diverged,
    }
    if n_hit:
        row["final_ground_fraction"] = float(np.count_nonzero(batch.final_hits & batch.hits) / n_hit)
    row.update(more)
    return row


def _summary_rows(command, rows, key="mvm", group=("solver",)):
    out = []
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[g] for g in group), []).append(r)
    for gkey, items in groups.items():
        vals = [r[key] for r in items]
        q25, q50, q75 = percentiles(vals, [0.25, 0.5, 0.75])
        row = {"command": command, "instance": "*summary*", "n_instances": len(items),
               f"median_{key}": q50, f"p25_{key}": q25, f"p75_{key}": q75,
               "mean_ps": float(np.mean([r["ps"] for r in items]))}
        row.update(dict(zip(group, gkey)))
        out.append(row)
    return out


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #
def cmd_solve(cfg, base):
    settings = common_settings(cfg)
    instances = resolve_instances(cfg, base)[:1]
    solvers = resolve_solvers(cfg)
    runs = _run_all(instances, solvers, settings)
    targets = _targets(instances, runs, _target_mode(cfg))
    rows = []
    for iid, J in instances:
        for label, variant, sched, extra in solvers:
            rows.append(_row("solve", iid, J, label, variant, sched, extra, settings,
                             runs[(iid, label)], targets[iid]))
    return rows


def cmd_bench(cfg, base):
    settings = common_settings(cfg)
    instances = resolve_instances(cfg, base)
    solvers = resolve_solvers(cfg)
    runs = _run_all(instances, solvers, settings)
    targets = _targets(instances, runs, _target_mode(cfg))
    rows = []
    for iid, J in instances:
        for label, variant, sched, extra in solvers:
            rows.append(_row("bench", iid, J, label, variant, sched, extra, settings,
                             runs[(iid, label)], targets[iid]))
    return rows + _summary_rows("bench", rows)


def cmd_scale(cfg, base):
    settings = common_settings(cfg)
    instances = resolve_instances(cfg, base)
    solvers = resolve_solvers(cfg)
    runs = _run_all(instances, solvers, settings)
    targets = _targets(instances, runs, _target_mode(cfg))
    rows = []
    for iid, J in instances:
        for label, variant, sched, extra in solvers:
            rows.append(_row("scale", iid, J, label, variant, sched, extra, settings,
                             runs[(iid, label)], targets[iid]))
    summary = _summary_rows("scale", rows, key="tts_steps", group=("solver", "n"))
    fits = []
    for label, *_ in solvers:
        pts = [(r["n"], r["median_tts_steps"]) for r in summary
               if r["solver"] == label and math.isfinite(r["median_tts_steps"])]
        fit = {"command": "scale", "instance": "*fit*", "solver": label, "points": len(pts)}
        if len({p[0] for p in pts}) >= 2:
            A, B, r2 = scaling_fit(pts, return_r2=True)
            fit.update(A=A, B=B, r2=r2)
        fits.append(fit)
    return rows + summary + fits


def cmd_noise_sweep(cfg, base):
    settings = common_settings(cfg)
    noise_cfg = noise_settings(cfg)
    if noise_cfg is None:
        raise ConfigError("noise", "noise-sweep needs a [noise] table with g_sq values")
    grid, r_b, nseed = noise_cfg
    instances = resolve_instances(cfg, base)
    solvers = resolve_solvers(cfg)
    mode = _target_mode(cfg)
    if mode == "best":
        raise ConfigError("target", "noise-sweep needs brute-force or numeric targets")
    targets = _targets(instances, {}, "brute" if mode == "auto" else mode)
    rows = []
    for g in grid:
        noise = NoiseParams(g, r_b, nseed)
        runs = _run_all(instances, solvers, settings, noise)
        for iid, J in instances:
            for label, variant, sched, extra in solvers:
                rows.append(_row("noise-sweep", iid, J, label, variant, sched, extra, settings,
                                 runs[(iid, label)], targets[iid], g_sq=g, r_b=r_b,
                                 noise_seed=nseed))
    return rows + _summary_rows("noise-sweep", rows, group=("solver", "g_sq"))


def cmd_chaos(cfg, base):
    settings = common_settings(cfg)
    instances = resolve_instances(cfg, base)
    solvers = resolve_solvers(cfg)
    sec = cfg.get("chaos", {})
    perturb = _get(sec, "perturb_std", "chaos.", float, 0.01)
    init_std = _get(sec, "init_std", "chaos.", float, 0.25)
    pairs = _get(sec, "pairs", "chaos.", int, 20, minimum=1)
    cps = sec.get("checkpoints", [0, 100, 400, 1000])
    if not isinstance(cps, list) or not all(isinstance(c, int) for c in cps):
        raise ConfigError("chaos.checkpoints", "expected a list of integers")
    rows = []
    for iid, J in instances:
        for label, variant, sched, _ in solvers:
            if variant == "dsbm":
                raise ConfigError("solvers", "chaos diagnostics need a CIM variant")
            if max(cps) > sched.n_steps:
                raise ConfigError("chaos.checkpoints", f"exceeds n_steps={sched.n_steps} of {label}")
            rs = np.array([[r for _, r in perturbation_correlation(
                variant, J, sched, settings["seed"] + k, perturb, cps, init_std)]
                for k in range(pairs)])
            for j, c in enumerate(sorted(set(cps))):
                col = rs[:, j]
                rows.append({"command": "chaos", "instance": iid, "n": J.n, "solver": label,
                             "variant": variant, "schedule": sched.as_dict(), "step": c,
                             "pairs": pairs, "seed": settings["seed"], "perturb_std": perturb,
                             "init_std": init_std, "mean_r": float(np.nanmean(col)),
                             "mean_abs_r": float(np.nanmean(np.abs(col))),
                             "undefined": int(np.count_nonzero(np.isnan(col)))})
    return rows


def cmd_energy(cfg, base):
    params = energy_params(cfg)
    sec = cfg.get("energy", {})
    rows = []
    if "mvm" in sec:
        mvms = _as_list(sec.get("mvm"))
        ns = _as_list(sec.get("n"))
        if not ns:
            raise ConfigError("energy.n", "required with energy.mvm")
        for mvm in mvms:
            for n in ns:
                rep = energy_report(float(mvm), int(n), params)
                rows.append({"command": "energy", "n": int(n), "mvm": float(mvm),
                             "params": asdict(params), **asdict(rep)})
        return rows
    # otherwise derive MVMs from a benchmark over the configured instances/solvers
    noise_cfg = noise_settings(cfg)
    settings = common_settings(cfg)
    instances = resolve_instances(cfg, base)
    solvers = resolve_solvers(cfg)
    if noise_cfg is not None:
        grid, r_b, _ = noise_cfg
        mode = _target_mode(cfg)
        targets = _targets(instances, {}, "brute" if mode == "auto" else mode)
        for label, variant, sched, _ in solvers:
            g, e, table = optimal_g_sq([(J, targets[i]) for i, J in instances], variant, grid,
                                       sched, n_trajectories=settings["trajectories"],
                                       seed=settings["seed"], params=params, r_b=r_b,
                                       n_jobs=settings["workers"], return_table=True)
            for pt in table:
                rows.append({"command": "energy", "solver": label, "variant": variant,
                             "schedule": sched.as_dict(), "g_sq": pt.g_sq,
                             "median_mvm": pt.median_mvm, "median_e_main": pt.median_e_main,
                             "ps": list(pt.ps), "optimal": pt.g_sq == g})
        return rows
    runs = _run_all(instances, solvers, settings)
    targets = _targets(instances, runs, _target_mode(cfg))
    for iid, J in instances:
        for label, variant, sched, extra in solvers:
            row = _row("energy", iid, J, label, variant, sched, extra, settings,
                       runs[(iid, label)], targets[iid])
            rep = energy_report(row["mvm"], J.n, params) if math.isfinite(row["mvm"]) else None
            row["params"] = asdict(params)
            if rep is not None:
                row.update(asdict(rep))
            rows.append(row)
    return rows


def cmd_presets(cfg, base):
    return [{"command": "presets", **p} for p in list_presets()]


HANDLERS = {
    "solve": cmd_solve,
    "bench": cmd_bench,
    "scale": cmd_scale,
    "noise-sweep": cmd_noise_sweep,
    "chaos": cmd_chaos,
    "energy": cmd_energy,
    "presets": cmd_presets,
}


# --------------------------------------------------------------------------- #
# output
# --------------------------------------------------------------------------- #
def _flatten(row: dict, prefix="") -> dict:
    out = {}
    for k, v in row.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def format_rows(rows, fmt: str) -> str:
    rows = [_clean(r) for r in rows]
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    flat = [_flatten(r) for r in rows]
    columns = []
    for r in flat:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cimsolve", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="TOML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dotted path, TOML value)")
        p.add_argument("-o", "--output", help="output file (default: stdout)")
        p.add_argument("-f", "--format", choices=("json", "csv"), help="output format")
        p.add_argument("-j", "--workers", type=int, help="worker threads")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--trajectories", type=int, help="trajectories per instance and solver")
        p.add_argument("--preset", help="solver preset (replaces the config's solvers)")
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        for key in ("workers", "seed", "trajectories"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
        if args.preset is not None:
            cfg.pop("solvers", None)
            cfg["solver"] = {**cfg.get("solver", {}), "preset": args.preset}
            cfg["solver"].pop("variant", None)
        out_cfg = cfg.get("output", {})
        if not isinstance(out_cfg, dict):
            raise ConfigError("output", "expected a table")
        fmt = args.format or out_cfg.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError("output.format", f"expected json or csv, got {fmt!r}")
        out_path = args.output or out_cfg.get("path")
        base = Path(args.config).resolve().parent if args.config else None
        rows = HANDLERS[args.command](cfg, base)
        text = format_rows(rows, fmt)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (ScheduleError, MetricsError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except tomllib.TOMLDecodeError as exc:
        print(f"config error: {args.config}: {exc}", file=stderr)
        return EXIT_CONFIG
    except InstanceError as exc:
        print(f"instance error: {exc}", file=stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=stderr)
        return EXIT_IO
    try:
        if out_path:
            Path(out_path).write_text(text)
        else:
            stdout.write(text)
    except OSError as exc:
        print(f"io error: {exc}", file=stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
