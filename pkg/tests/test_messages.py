import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftprop.config import BPConfig, Flooding, Mode, TwoPass
from liftprop.messages import (
    LOG_FLOOR,
    AnchorSlope,
    GaussianParam,
    GridLog,
    GridUnderflowError,
    PointMass,
    message_change,
)


def test_from_log_normalises_and_floors():
    g = GridLog.from_log(0.0, 1.0, [1.0, 3.0, -np.inf, 2.0])
    assert g.logvals.max() == 0.0
    assert g.logvals[2] == LOG_FLOOR
    with pytest.raises(GridUnderflowError):
        GridLog.from_log(0.0, 1.0, [-np.inf] * 5)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridLog(1.0, 0.0, np.zeros(5))
    with pytest.raises(ValueError):
        GridLog(0.0, 1.0, [0.0, np.nan, 0.0])


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), x=st.floats(-3, 4))
def test_log_at_exact_on_linear(a, b, x):
    g = GridLog(-1.0, 2.0, a * np.linspace(-1.0, 2.0, 33) + b)
    assert float(g.log_at(x)) == pytest.approx(a * x + b, abs=1e-9)


def test_constant_is_constant_everywhere():
    g = GridLog.constant(-1.0, 1.0, 33)
    assert g.is_constant
    assert np.all(g.log_at([-100.0, 0.0, 100.0]) == 0.0)


def test_moments_of_gaussian():
    x = np.linspace(-8, 8, 1025)
    g = GridLog.from_log(-8.0, 8.0, -0.5 * ((x - 0.3) / 1.2) ** 2)
    mean, std = g.moments()
    assert mean == pytest.approx(0.3, abs=1e-9)
    assert std == pytest.approx(1.2, rel=1e-6)


def test_gaussian_validation():
    with pytest.raises(ValueError):
        GaussianParam(0.0, 0.0)
    assert GaussianParam(1.0, 2.0).logpdf(3.0) == -0.5


def test_message_change():
    assert message_change(PointMass(1.0), PointMass(1.5)) == 0.5
    assert message_change(AnchorSlope(1.0, 2.0), AnchorSlope(1.0, 2.25)) == 0.25
    assert message_change(None, PointMass(0.0)) == math.inf
    assert message_change(AnchorSlope(None, 0.0), AnchorSlope(1.0, 0.0)) == math.inf
    assert message_change(GridLog.constant(0, 1, 33), GridLog.constant(5, 9, 33)) == 0.0


def test_to_dict_round_values():
    assert AnchorSlope(3.0, 3.0).to_dict() == {"type": "anchor_slope", "anchor": 3.0, "slope": 3.0}
    d = GridLog.constant(0.0, 1.0, 3).to_dict()
    assert d["n"] == 3 and d["logvals"] == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("kw", [
    {"kT": 0.0}, {"kT": float("inf")}, {"sigma": -1.0}, {"grid_points": 32}, {"grid_points": 31},
    {"grid_span": 0.0}, {"quad_nodes": 0}, {"quad_nodes": 10}, {"schedule": "fast"},
    {"mc_samples": 1}, {"mode": "fuzzy"},
])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        BPConfig(**kw)


@pytest.mark.parametrize("kw", [{"max_iters": 0}, {"tol": 0.0}, {"max_iters": 1.5}])
def test_flooding_rejects(kw):
    with pytest.raises(ValueError):
        Flooding(**kw)


def test_config_round_trip():
    cfg = BPConfig(mode="grid", schedule=Flooding(10, 1e-8))
    assert cfg.mode is Mode.GRID
    d = cfg.to_dict()
    assert d["schedule"] == {"kind": "flooding", "max_iters": 10, "tol": 1e-8}
    assert cfg.replace(schedule=TwoPass()).to_dict()["schedule"] == {"kind": "two-pass"}
