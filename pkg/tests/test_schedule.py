import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cimsolve.solvers.schedule import (
    PRESETS,
    ScheduleError,
    ScheduleParams,
    get_preset,
    gset_preset,
    list_presets,
    schedule_value,
)


def cfc_like():
    return ScheduleParams(1000, 0.4, {"p": (-1.0, 1.0), "alpha": 1.0, "beta": 0.2}, 900, 100)


def test_ramp_examples():
    s = cfc_like()
    assert schedule_value(s, "p", 0) == -1.0
    assert schedule_value(s, "p", 450) == 0.0
    assert schedule_value(s, "p", 950) == 1.0
    assert schedule_value(s, "alpha", 999) == 1.0


def test_errors():
    s = cfc_like()
    with pytest.raises(ScheduleError):
        schedule_value(s, "c", 0)
    with pytest.raises(ScheduleError):
        schedule_value(s, "p", 1000)
    with pytest.raises(ScheduleError):
        schedule_value(s, "p", -1)
    with pytest.raises(ScheduleError):
        ScheduleParams(10, 0.1, {"p": 1.0}, t_r=5, t_p=4)
    with pytest.raises(ScheduleError):
        ScheduleParams(10, 0.0, {"p": 1.0})
    with pytest.raises(ScheduleError):
        ScheduleParams(10, 0.1, {"beta": -0.1})
    with pytest.raises(ScheduleError):
        ScheduleParams(10, 0.1, {"alpha": 0.0})
    with pytest.raises(ScheduleError):
        ScheduleParams(10, 0.1, {"k": (0.1, -0.1)})
    with pytest.raises(ScheduleError):
        ScheduleParams(10, 0.1, {"gamma": 1.0})


@given(st.integers(1, 500), st.floats(-5, 5), st.floats(-5, 5), st.data())
@settings(max_examples=50, deadline=None)
def test_values_vector_matches_scalar(n_steps, a, b, data):
    t_r = data.draw(st.integers(0, n_steps))
    s = ScheduleParams(n_steps, 0.1, {"p": (a, b)}, t_r=t_r)
    vec = s.values("p")
    for k in data.draw(st.lists(st.integers(0, n_steps - 1), min_size=1, max_size=10)):
        assert vec[k] == s.value("p", k)
    # linear on the ramp, constant on the plateau
    if t_r >= 3:
        d = np.diff(vec[:t_r])
        np.testing.assert_allclose(d, d[0], atol=1e-12)
    assert np.all(vec[t_r:] == b)


def test_scaled_keeps_shape():
    s = get_preset("cac-sk").schedule.scaled(500)
    assert s.n_steps == 500 and s.t_r == 450 and s.t_p == 50
    assert s.params == get_preset("cac-sk").schedule.params


@pytest.mark.parametrize("name, expect", [
    ("cac-sk", dict(n_steps=3200, dt=0.125, t_r=2880, t_p=320, p=[-1.0, 1.0],
                    alpha=[1.0, 2.5], beta=[0.8, 0.8])),
    ("cfc-sk", dict(n_steps=1000, dt=0.4, t_r=900, t_p=100, p=[-1.0, 1.0],
                    alpha=[1.0, 1.0], beta=[0.2, 0.2])),
    ("sfc-sk", dict(n_steps=500, dt=0.4, p=[-1.0, 1.0], c=[1.0, 3.0], beta=[0.3, 0.1],
                    k=[0.2, 0.2])),
    ("dsbm-sk", dict(n_steps=2000, dt=1.25, c=[0.5, 0.5])),
    ("cac-n1200", dict(n_steps=8000, dt=0.125, t_r=7200, t_p=800)),
])
def test_shipped_presets(name, expect):
    d = get_preset(name).schedule.as_dict()
    for k, v in expect.items():
        assert d[k] == v, k


def test_gset_presets():
    pr = gset_preset("cac", 11)
    d = pr.schedule.as_dict()
    assert d["p"] == [-4.0, -4.0] and d["n_steps"] == 5000 and d["dt"] == 0.1
    assert gset_preset("cac", "G12").name == pr.name
    assert gset_preset("cfc", 11).variant == "cfc"
    assert gset_preset("sfc", 11).variant == "sfc"
    with pytest.raises(KeyError):
        gset_preset("cac", 999)


def test_catalog_complete():
    names = {row["name"] for row in list_presets()}
    assert names == set(PRESETS)
    for row in list_presets():
        assert row["t_r"] + row["t_p"] == row["n_steps"]
