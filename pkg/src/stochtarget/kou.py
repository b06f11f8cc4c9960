"""Double-exponential jump diffusion stock and constant-rate bond.

Paths are simulated exactly in log space per period: a Poisson jump count,
one Gaussian diffusion increment and the product of the jump multipliers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bootstrap import path_rng
from .paths import PathSet

# config-file key -> field name
_KEYS = {"mu": "mu", "sigma": "sigma", "lambda": "lambda_jump", "p_up": "p_up",
         "eta1": "eta1", "eta2": "eta2", "r": "r"}


@dataclass(frozen=True)
class KouParams:
    mu: float
    sigma: float
    lambda_jump: float
    p_up: float
    eta1: float
    eta2: float
    r: float

    def __post_init__(self):
        if not self.eta1 > 1:
            raise ValueError("eta1 must exceed 1 for E[xi] to be finite")
        if not self.eta2 > 0:
            raise ValueError("eta2 must be positive")
        if self.lambda_jump < 0 or self.sigma < 0:
            raise ValueError("lambda and sigma must be non-negative")
        if not 0 <= self.p_up <= 1:
            raise ValueError("p_up must lie in [0, 1]")


def default_params() -> KouParams:
    """Real CRSP cap-weighted index / 3-month T-bill calibration, 1926:1-2015:12."""
    return KouParams(mu=0.08889, sigma=0.14771, lambda_jump=0.32222, p_up=0.27586,
                     eta1=4.4273, eta2=5.2613, r=0.00827)


def load_params(path) -> KouParams:
    """Parse ``key = value`` lines (keys: mu sigma lambda p_up eta1 eta2 r)."""
    vals = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _KEYS:
            raise ValueError(f"{path}: line {lineno}: unknown key {k!r}")
        vals[_KEYS[k]] = float(v)
    missing = set(_KEYS.values()) - set(vals)
    if missing:
        raise ValueError(f"{path}: missing keys {sorted(missing)}")
    return KouParams(**vals)


def dump_params(params: KouParams, path) -> None:
    d = asdict(params)
    lines = [f"{k} = {d[f]!r}" for k, f in _KEYS.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def jump_log_mean(params: KouParams) -> float:
    return params.p_up / params.eta1 - (1 - params.p_up) / params.eta2


def jump_mean(params: KouParams) -> float:
    # Downward branch integrates e^y * eta2 e^{eta2 y} over y <= 0 -> eta2/(eta2+1).
    if not params.eta1 > 1:
        raise ValueError("eta1 must exceed 1")
    return params.p_up * params.eta1 / (params.eta1 - 1) + (1 - params.p_up) * params.eta2 / (params.eta2 + 1)


def sample_log_jump(params: KouParams, rng: np.random.Generator, size=None):
    up = rng.random(size) < params.p_up
    e1 = rng.exponential(1.0 / params.eta1, size)
    e2 = rng.exponential(1.0 / params.eta2, size)
    return np.where(up, e1, -e2)


def sample_jump(params: KouParams, rng: np.random.Generator, size=None):
    return np.exp(sample_log_jump(params, rng, size))


def bond_return(params: KouParams, dt: float) -> float:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return math.exp(params.r * dt)


def simulate_stock_periods(params: KouParams, dt: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent one-period gross stock returns."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    drift = (params.mu - params.lambda_jump * (jump_mean(params) - 1) - 0.5 * params.sigma**2) * dt
    z = rng.standard_normal(n)
    log_r = drift + params.sigma * math.sqrt(dt) * z
    if params.lambda_jump > 0:
        k = rng.poisson(params.lambda_jump * dt, size=n)
        total = int(k.sum())
        if total:
            y = sample_log_jump(params, rng, total)
            log_r = log_r + np.bincount(np.repeat(np.arange(n), k), weights=y, minlength=n)
    return np.exp(log_r)


def simulate_stock_period(params: KouParams, dt: float, rng: np.random.Generator) -> float:
    return float(simulate_stock_periods(params, dt, 1, rng)[0])


def _sim_chunk(args):
    params, n_periods, dt, seed, lo, hi = args
    out = np.empty((hi - lo, n_periods, 2))
    out[:, :, 1] = bond_return(params, dt)
    for j, i in enumerate(range(lo, hi)):
        out[j, :, 0] = simulate_stock_periods(params, dt, n_periods, path_rng(seed, i))
    return out


def simulate_panel(
    params: KouParams, n_periods: int, dt: float, n_paths: int, seed: int, workers: int = 1
) -> PathSet:
    """``n_paths`` synthetic (stock, bond) paths of ``n_periods`` periods of length ``dt`` years."""
    if n_periods < 1 or n_paths < 1:
        raise ValueError("n_periods and n_paths must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if workers <= 1:
        data = _sim_chunk((params, n_periods, dt, seed, 0, n_paths))
    else:
        bounds = np.linspace(0, n_paths, workers + 1).astype(int)
        jobs = [(params, n_periods, dt, seed, lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            data = np.concatenate(list(ex.map(_sim_chunk, jobs)))
    prov = {
        "source": "synthetic",
        "granularity": "period",
        "kou": asdict(params),
        "dt": dt,
        "seed": seed,
        "asset_names": ["stock", "bond"],
    }
    return PathSet(data, prov)
