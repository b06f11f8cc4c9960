import math

import numpy as np
import pytest
from mpmath import mp, mpf, exp as mpexp

from stochtarget.kou import (
    KouParams,
    bond_return,
    default_params,
    dump_params,
    jump_log_mean,
    jump_mean,
    load_params,
    sample_jump,
    sample_log_jump,
    simulate_panel,
    simulate_stock_period,
    simulate_stock_periods,
)


def params(**kw):
    base = dict(mu=0.08, sigma=0.15, lambda_jump=0.3, p_up=0.3, eta1=4.0, eta2=5.0, r=0.01)
    base.update(kw)
    return KouParams(**base)


def test_defaults():
    p = default_params()
    assert (p.mu, p.sigma, p.lambda_jump, p.p_up) == (0.08889, 0.14771, 0.32222, 0.27586)
    assert (p.eta1, p.eta2, p.r) == (4.4273, 5.2613, 0.00827)
    assert p.eta1 > 1


def test_invalid_params():
    with pytest.raises(ValueError):
        params(eta1=1.0)
    with pytest.raises(ValueError):
        params(p_up=1.5)
    with pytest.raises(ValueError):
        params(eta2=0)


def test_jump_mean_pure_branches():
    assert jump_mean(params(p_up=1.0, eta1=2.0)) == pytest.approx(2.0)
    assert jump_mean(params(p_up=0.0, eta2=1.0)) == pytest.approx(0.5)


def test_jump_mean_matches_density_quadrature():
    from scipy.integrate import quad

    p = default_params()
    up = quad(lambda y: p.eta1 * math.exp((1 - p.eta1) * y), 0, math.inf)[0]
    down = quad(lambda y: p.eta2 * math.exp((1 + p.eta2) * y), -math.inf, 0)[0]
    assert jump_mean(p) == pytest.approx(p.p_up * up + (1 - p.p_up) * down, rel=1e-10)


def test_jump_sign_branches():
    rng = np.random.default_rng(0)
    assert np.all(sample_jump(params(p_up=1.0), rng, 10_000) >= 1)
    assert np.all(sample_jump(params(p_up=0.0), rng, 10_000) <= 1)


def test_jump_moments_mc():
    p = default_params()
    n = 10_000_000
    y = sample_log_jump(p, np.random.default_rng(1), n)
    assert abs(y.mean() - jump_log_mean(p)) <= 3 * y.std() / math.sqrt(n)
    xi = np.exp(y)
    assert abs(xi.mean() - jump_mean(p)) <= 3 * xi.std() / math.sqrt(n)


def test_deterministic_drift():
    p = params(lambda_jump=0.0, sigma=0.0, mu=0.07)
    assert simulate_stock_period(p, 0.5, np.random.default_rng(0)) == pytest.approx(math.exp(0.035), rel=1e-15)
    with pytest.raises(ValueError):
        simulate_stock_period(p, 0.0, np.random.default_rng(0))


def test_compensated_mean():
    p = default_params()
    n = 1_000_000
    x = simulate_stock_periods(p, 1.0, n, np.random.default_rng(2))
    assert np.all(x > 0)
    assert abs(x.mean() - math.exp(p.mu)) <= 3 * x.std() / math.sqrt(n)


def test_pure_diffusion_variance():
    p = params(lambda_jump=0.0, sigma=0.2)
    n = 1_000_000
    lr = np.log(simulate_stock_periods(p, 0.25, n, np.random.default_rng(3)))
    target = 0.2**2 * 0.25
    # var of sample variance for normal data: 2 s^4 / (n - 1)
    assert abs(lr.var(ddof=1) - target) <= 3 * math.sqrt(2 * target**2 / (n - 1))


def test_bond():
    assert bond_return(params(r=0.0), 1.0) == 1.0
    mp.dps = 30
    assert bond_return(default_params(), 1.0) == pytest.approx(float(mpexp(mpf("0.00827"))), rel=1e-15)
    assert bond_return(default_params(), 1.0) == pytest.approx(1.008304, abs=5e-7)
    half = bond_return(default_params(), 0.5)
    assert half * half == pytest.approx(bond_return(default_params(), 1.0), rel=1e-15)


def test_panel_deterministic_case():
    p = params(lambda_jump=0.0, sigma=0.0, mu=0.05, r=0.02)
    ps = simulate_panel(p, 1, 1.0, 1, seed=0)
    np.testing.assert_allclose(ps.returns[0, 0], [math.exp(0.05), math.exp(0.02)], rtol=1e-15)


def test_panel_determinism():
    a = simulate_panel(default_params(), 30, 1.0, 50, seed=9)
    b = simulate_panel(default_params(), 30, 1.0, 50, seed=9)
    c = simulate_panel(default_params(), 30, 1.0, 50, seed=9, workers=3)
    np.testing.assert_array_equal(a.returns, b.returns)
    np.testing.assert_array_equal(a.returns, c.returns)
    assert a.provenance["source"] == "synthetic"


def test_panel_long_horizon_mean():
    p = default_params()
    ps = simulate_panel(p, 30, 1.0, 100_000, seed=4)
    growth = np.prod(ps.returns[:, :, 0], axis=1)
    se = growth.std() / math.sqrt(growth.size)
    assert abs(growth.mean() - math.exp(30 * p.mu)) <= 3 * se


def test_params_file_round_trip(tmp_path):
    dump_params(default_params(), tmp_path / "k.txt")
    assert load_params(tmp_path / "k.txt") == default_params()
    (tmp_path / "bad.txt").write_text("mu = 0.1\n")
    with pytest.raises(ValueError, match="missing"):
        load_params(tmp_path / "bad.txt")
