import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from stochtarget.kou import default_params, simulate_panel
from stochtarget.objective import InvestmentSpec, SampleObjective
from stochtarget.trainer import TrainConfig, TrainingError, cauchy_point, train, trust_region_step


def test_zero_gradient_zero_step():
    step, pred = trust_region_step(np.zeros(4), np.eye(4), 1.0)
    np.testing.assert_array_equal(step, 0.0)
    assert pred == 0.0


def test_newton_step_inside_radius():
    g = np.array([2.0, 0, 0, 0])
    step, pred = trust_region_step(g, np.eye(4), 10.0)
    np.testing.assert_allclose(step, [-2, 0, 0, 0], atol=1e-15)
    assert pred == pytest.approx(2.0)


def test_clipped_step_on_boundary():
    g = np.array([2.0, 0, 0, 0])
    step, _ = trust_region_step(g, np.eye(4), 1.0)
    np.testing.assert_allclose(step, [-1, 0, 0, 0], atol=1e-15)


def test_indefinite_model_falls_back():
    g = np.array([1.0, 0.5])
    H = np.diag([1.0, -2.0])
    cp = cauchy_point(g, H, 0.7)
    step, pred = trust_region_step(g, H, 0.7, shift_indefinite=False)
    np.testing.assert_allclose(step, cp)
    shifted, pred2 = trust_region_step(g, H, 0.7)
    assert np.linalg.norm(shifted) <= 0.7 * (1 + 1e-12)
    assert pred2 >= pred >= 0


@st.composite
def tr_problems(draw):
    n = draw(st.integers(1, 6))
    elems = st.floats(-5, 5, allow_nan=False)
    A = draw(hnp.arrays(float, (n, n), elements=elems))
    g = draw(hnp.arrays(float, n, elements=elems))
    radius = draw(st.floats(1e-3, 10))
    return g, A + A.T, radius


@given(tr_problems())
@settings(max_examples=200, deadline=None)
def test_step_within_radius_and_decreasing(problem):
    g, H, radius = problem
    step, pred = trust_region_step(g, H, radius)
    assert np.linalg.norm(step) <= radius * (1 + 1e-9)
    assert pred >= -1e-12
    assert pred == pytest.approx(-(g @ step + 0.5 * step @ H @ step), rel=1e-9, abs=1e-12)


@pytest.fixture(scope="module")
def kou_small():
    return simulate_panel(default_params(), 30, 1.0, 200, 11)


def test_training_monotone_and_deterministic(kou_small):
    cfg = TrainConfig(max_iterations=15, restarts=2, seed=4)
    spec = InvestmentSpec()
    a = train(kou_small, spec, cfg)
    b = train(kou_small, spec, cfg)
    assert a.to_json() == b.to_json()
    np.testing.assert_array_equal(a.best_params.flat(), b.best_params.flat())
    for rec in a.restarts:
        hist = [rec.start_objective] + [it["objective"] for it in rec.iterations if it["accepted"]]
        assert all(y <= x for x, y in zip(hist, hist[1:]))
        assert rec.final_objective <= rec.start_objective
    assert a.best_objective == min(r.final_objective for r in a.restarts)
    obj = SampleObjective(kou_small, spec)
    assert obj.value(a.best_params) == pytest.approx(a.best_objective, rel=1e-12)


def test_report_json_fields(kou_small):
    rep = train(kou_small, InvestmentSpec(), TrainConfig(max_iterations=3, restarts=1))
    d = json.loads(rep.to_json())
    it = d["restarts"][0]["iterations"][0]
    assert set(it) == {"objective", "grad_norm", "radius", "accepted"}
    assert d["restarts"][0]["termination"] in ("gradient", "radius", "max_iterations")
    assert "wall_time" not in d


def test_shortfall_vs_benchmark_recovers_zero(kou_small):
    spec = InvestmentSpec(mode="shortfall_vs_benchmark")
    rep = train(kou_small, spec, TrainConfig(max_iterations=60, restarts=1, seed=1))
    assert rep.best_objective <= 1e-6 * (spec.q * spec.n_periods) ** 2


def test_flat_market_converges_immediately():
    spec = InvestmentSpec(n_periods=5, horizon=5.0, spread=0.0, mode="shortfall_vs_elevated")
    rep = train(np.ones((10, 5, 2)), spec, TrainConfig(restarts=1))
    r = rep.restarts[0]
    assert r.start_objective == pytest.approx(0.0, abs=1e-20)
    assert r.termination == "gradient" and r.iterations == []


def test_non_finite_start_raises():
    R = np.ones((3, 4, 2))
    R[0, 0, 0] = np.nan
    spec = InvestmentSpec(n_periods=4, horizon=4.0)
    with pytest.raises(TrainingError):
        train(R, spec, TrainConfig(restarts=1, max_redraws=2))


@pytest.mark.parametrize("kw", [dict(max_iterations=0), dict(grad_tolerance=0.0), dict(restarts=0),
                                dict(initial_trust_radius=20.0), dict(shrink_ratio=0.9)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


@given(hnp.arrays(float, 2, elements=st.floats(-3, 3)), st.floats(-4, -0.01), st.floats(-4, 4),
       st.floats(0, 3.14), st.floats(0.05, 5))
@settings(max_examples=100, deadline=None)
def test_indefinite_step_beats_dense_circle_scan(g, lam1, lam2, angle, radius):
    c, s = np.cos(angle), np.sin(angle)
    Q = np.array([[c, -s], [s, c]])
    H = Q @ np.diag([lam1, lam2]) @ Q.T
    if np.linalg.norm(g) < 1e-6:
        return
    step, pred = trust_region_step(g, H, radius)
    phis = np.linspace(0, 2 * np.pi, 20_001)
    pts = radius * np.column_stack([np.cos(phis), np.sin(phis)])
    best = (pts @ g + 0.5 * np.einsum("ij,jk,ik->i", pts, H, pts)).min()
    assert -pred <= best + 1e-6 * (1 + abs(best))
    assert np.linalg.norm(step) == pytest.approx(radius, rel=1e-9)
