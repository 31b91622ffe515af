import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cimsolve.cli import run
from cimsolve.instances import sk_random, to_gset


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


FERRO = """
seed = 3
trajectories = 8
[instance]
kind = "matrix"
name = "ferro"
couplings = [[0, -1], [-1, 0]]
[[solvers]]
preset = "cac-sk"
n_steps = 200
"""


@pytest.fixture
def ferro_cfg(tmp_path):
    p = tmp_path / "ferro.toml"
    p.write_text(FERRO)
    return str(p)


def test_solve_ferromagnet(ferro_cfg):
    code, out, err = call("solve", "-c", ferro_cfg)
    assert code == 0, err
    (row,) = [r for r in rows(out) if r.get("instance") == "ferro"]
    assert row["ps"] == 1.0
    assert row["best_energy"] == -1.0
    assert row["target_energy"] == -1.0
    assert row["schedule"]["n_steps"] == 200
    assert "workers" not in json.dumps(rows(out))


def test_invalid_field_exits_2_with_path(ferro_cfg):
    code, out, err = call("solve", "-c", ferro_cfg, "--trajectories", "0")
    assert code == 2 and out == ""
    assert "trajectories" in err
    code, _, err = call("solve", "-c", ferro_cfg, "--set", "solvers[0].dt=-1")
    assert code == 2
    assert "dt" in err


def test_unknown_preset_and_kind(ferro_cfg):
    code, _, err = call("solve", "-c", ferro_cfg, "--preset", "nope")
    assert code == 2 and "nope" in err
    code, _, err = call("solve", "-c", ferro_cfg, "--set", 'instance.kind="weird"')
    assert code == 2 and "instance.kind" in err


def test_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("seed = = 1\n")
    assert call("solve", "-c", str(p))[0] == 2


def test_missing_gset_file_exit_1(tmp_path):
    p = tmp_path / "g.toml"
    p.write_text('[instance]\nkind = "gset"\npath = "missing.txt"\n[solver]\npreset = "cac-sk"\n')
    assert call("solve", "-c", str(p))[0] == 1


def test_malformed_gset_exit_1(tmp_path):
    (tmp_path / "g.txt").write_text("3 2\n1 2 1\n")
    p = tmp_path / "g.toml"
    p.write_text('[instance]\nkind = "gset"\npath = "g.txt"\n[solver]\npreset = "cac-sk"\n')
    code, _, err = call("solve", "-c", str(p))
    assert code == 1 and "line" in err


def test_gset_file_relative_to_config(tmp_path):
    J = sk_random(8, 0)
    (tmp_path / "g8.txt").write_text(to_gset(J))
    p = tmp_path / "g.toml"
    p.write_text('trajectories = 4\n[instance]\nkind = "gset"\npath = "g8.txt"\n'
                 '[[solvers]]\npreset = "cfc-sk"\nn_steps = 100\n')
    code, out, err = call("solve", "-c", str(p))
    assert code == 0, err
    assert rows(out)[0]["n"] == 8


def test_byte_identical_across_workers(tmp_path):
    p = tmp_path / "b.toml"
    p.write_text("""
seed = 11
trajectories = 12
[instance]
kind = "sk"
n = 16
seeds = [0, 1]
[[solvers]]
preset = "cfc-sk"
n_steps = 150
[[solvers]]
preset = "dsbm-sk"
n_steps = 150
""")
    a = call("bench", "-c", str(p), "-j", "1")
    b = call("bench", "-c", str(p), "-j", "3")
    c = call("bench", "-c", str(p), "-j", "1")
    assert a[0] == b[0] == 0
    assert a[1] == b[1] == c[1]


def test_csv_output(ferro_cfg, tmp_path):
    out_file = tmp_path / "o.csv"
    code, out, err = call("solve", "-c", ferro_cfg, "-f", "csv", "-o", str(out_file))
    assert code == 0 and out == ""
    lines = out_file.read_text().splitlines()
    header = lines[0].split(",")
    assert "ps" in header and "schedule.n_steps" in header


def test_set_overrides(ferro_cfg):
    code, out, _ = call("solve", "-c", ferro_cfg, "--set", "trajectories=3",
                        "--set", "solvers.0.n_steps=50")
    assert code == 0
    r = rows(out)[0]
    assert r["trajectories"] == 3 and r["schedule"]["n_steps"] == 50


def test_presets_listing():
    code, out, _ = call("presets")
    assert code == 0
    names = {r["name"] for r in rows(out)}
    assert {"cac-sk", "cfc-sk", "sfc-sk", "dsbm-sk"} <= names


def test_scale_emits_fit(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text("""
trajectories = 20
target = "best"
[instance]
kind = "sk"
sizes = [8, 12, 16]
seeds = [0, 1]
[[solvers]]
preset = "cfc-sk"
n_steps = 100
""")
    code, out, err = call("scale", "-c", str(p))
    assert code == 0, err
    fits = [r for r in rows(out) if r["instance"] == "*fit*"]
    assert len(fits) == 1 and {"A", "B", "r2"} <= set(fits[0])


def test_noise_sweep_and_chaos(tmp_path):
    p = tmp_path / "n.toml"
    p.write_text("""
trajectories = 6
[instance]
kind = "sk"
n = 10
[[solvers]]
preset = "sfc-sk"
n_steps = 100
[noise]
g_sq = [1e-6, 1e-2]
r_b = 0.1
[chaos]
pairs = 2
checkpoints = [0, 50]
""")
    code, out, err = call("noise-sweep", "-c", str(p))
    assert code == 0, err
    assert sorted({r["g_sq"] for r in rows(out) if "g_sq" in r}) == [1e-6, 1e-2]
    code, out, err = call("chaos", "-c", str(p))
    assert code == 0, err
    assert any("mean_r" in r for r in rows(out))


def test_energy_from_mvm(tmp_path):
    p = tmp_path / "e.toml"
    p.write_text("[energy]\nmvm = [1e4]\nn = [100]\ng_sq = 1e-3\n")
    code, out, err = call("energy", "-c", str(p))
    assert code == 0, err
    (r,) = rows(out)
    assert r["e_main"] == pytest.approx(2.5467e-11, rel=1e-3)


def test_console_entry_point(ferro_cfg):
    res = subprocess.run([sys.executable, "-m", "cimsolve.cli", "solve", "-c", ferro_cfg],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert rows(res.stdout)[0]["ps"] == 1.0
