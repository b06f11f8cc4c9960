"""Multi-start dogleg trust-region Newton training of the allocation network."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bootstrap import path_rng
from .objective import InvestmentSpec, SampleObjective
from .policy import PolicyParams, init_params

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Optimizer could not produce a finite starting point or iterate."""


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 200
    grad_tolerance: float = 1e-6
    initial_trust_radius: float = 1.0
    max_trust_radius: float = 10.0
    min_trust_radius: float = 1e-9
    shrink_ratio: float = 0.25
    expand_ratio: float = 0.75
    restarts: int = 5
    seed: int = 0
    init_scale: float = 0.5
    hidden: int = 3
    hessian_step: float = 1e-5
    max_redraws: int = 10

    def __post_init__(self):
        if self.max_iterations < 1 or not self.grad_tolerance > 0 or self.restarts < 1:
            raise ValueError("need max_iterations >= 1, grad_tolerance > 0, restarts >= 1")
        if not 0 < self.initial_trust_radius <= self.max_trust_radius:
            raise ValueError("need 0 < initial_trust_radius <= max_trust_radius")
        if not 0 <= self.shrink_ratio < self.expand_ratio < 1:
            raise ValueError("need 0 <= shrink_ratio < expand_ratio < 1")


@dataclass
class RestartLog:
    start_objective: float
    final_objective: float
    termination: str
    iterations: list = field(default_factory=list)  # dicts: objective, grad_norm, radius, accepted
    params: PolicyParams | None = None

    @property
    def objective_history(self) -> list[float]:
        return [self.start_objective] + [it["objective"] for it in self.iterations]


@dataclass
class TrainReport:
    best_params: PolicyParams
    best_restart: int
    restarts: list[RestartLog]
    wall_time: float = 0.0

    @property
    def best_objective(self) -> float:
        return self.restarts[self.best_restart].final_objective

    def to_dict(self) -> dict:
        # wall_time is left out so that reruns give byte-identical files
        return {
            "best_restart": self.best_restart,
            "best_objective": self.best_objective,
            "restarts": [
                {
                    "start_objective": r.start_objective,
                    "final_objective": r.final_objective,
                    "termination": r.termination,
                    "iterations": r.iterations,
                }
                for r in self.restarts
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _norm_and_unit(v):
    # scale first so that tiny or huge gradients do not under/overflow when squared
    m = np.abs(v).max()
    w = v / m
    n = np.linalg.norm(w)
    return m * n, w / n


def cauchy_point(g, H, radius: float) -> np.ndarray:
    gnorm, u = _norm_and_unit(g)
    uHu = u @ H @ u
    tau = 1.0 if uHu <= 0 or gnorm >= radius * uHu else gnorm / (radius * uHu)
    return -tau * radius * u


def trust_region_step(grad, hess, radius: float, shift_indefinite: bool = True):
    """Dogleg step for min g.p + p.H.p/2 subject to |p| <= radius.

    Returns (step, predicted_reduction). When H is not positive definite the
    Cauchy point is used; with ``shift_indefinite`` the boundary solution
    p = -(H + mu I)^{-1} g, mu > -lambda_min, competes with it and the step
    with the larger predicted reduction wins.
    """
    g = np.asarray(grad, dtype=float)
    H = np.asarray(hess, dtype=float)
    if np.linalg.norm(g) == 0.0:
        return np.zeros_like(g), 0.0

    def pred(p):
        return float(-(g @ p + 0.5 * p @ H @ p))

    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        p = cauchy_point(g, H, radius)
        if shift_indefinite:
            q = _boundary_step(g, H, radius)
            if pred(q) > pred(p):
                p = q
        return p, pred(p)
    return _dogleg(g, H, radius)


def _boundary_step(g, H, radius):
    """Minimizer of the quadratic model on the sphere |p| = radius for indefinite H."""
    lam, V = np.linalg.eigh(H)
    c = V.T @ g
    lo = -lam[0]
    scale = max(abs(lam[-1]), abs(lam[0]), 1e-300)

    def norm_minus_radius(mu):
        return np.linalg.norm(c / (lam + mu)) - radius

    # hard case: g has (almost) no weight on the lowest eigenvector
    tiny = np.abs(lam - lam[0]) <= 1e-12 * scale
    if np.linalg.norm(c[tiny]) <= 1e-12 * np.linalg.norm(c):
        rest = np.zeros_like(c)
        rest[~tiny] = -c[~tiny] / (lam[~tiny] - lam[0])
        with np.errstate(over="ignore"):
            r2 = radius**2 - rest @ rest
        if r2 >= 0:
            rest[np.flatnonzero(tiny)[0]] = np.sqrt(r2)
            return V @ rest
    hi = lo + np.linalg.norm(g) / radius + 1.0
    while norm_minus_radius(hi) > 0:
        hi = lo + 2 * (hi - lo)
    a = lo + 1e-15 * max(1.0, abs(lo))
    if norm_minus_radius(a) <= 0:
        mu = a
    else:
        mu = brentq(norm_minus_radius, a, hi, xtol=1e-300, maxiter=500)
    p = V @ (-c / (lam + mu))
    n = np.linalg.norm(p)
    if n > radius:
        return p * (radius / n)
    # near the hard case mu cannot resolve the gap; top up along the lowest eigenvector
    v = V[:, 0]
    pv = p @ v
    tau = -pv + np.sqrt(pv * pv + radius**2 - n * n)
    cand = [p + tau * v, p - (2 * pv + tau) * v]
    return min(cand, key=lambda q: g @ q + 0.5 * q @ H @ q)


def _dogleg(g, H, radius):
    def pred(p):
        return float(-(g @ p + 0.5 * p @ H @ p))

    gnorm, u = _norm_and_unit(g)
    uHu = u @ H @ u
    chol = np.linalg.cholesky(H)
    y = np.linalg.solve(chol, -g)
    p_newton = np.linalg.solve(chol.T, y)
    if np.linalg.norm(p_newton) <= radius:
        return p_newton, pred(p_newton)
    if gnorm >= radius * uHu:
        p = -radius * u
        return p, pred(p)
    sd_norm = gnorm / uHu
    p_sd = -sd_norm * u
    # |p_sd + t (p_newton - p_sd)| = radius, t in [0, 1]
    d = p_newton - p_sd
    a, b, c = d @ d, 2 * p_sd @ d, sd_norm**2 - radius**2
    t = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    p = p_sd + t * d
    return p, pred(p)


def _descend(obj: SampleObjective, theta: np.ndarray, f: float, g: np.ndarray, cfg: TrainConfig) -> RestartLog:
    radius = cfg.initial_trust_radius
    rec = RestartLog(start_objective=f, final_objective=f, termination="max_iterations")
    for _ in range(cfg.max_iterations):
        gnorm = float(np.linalg.norm(g))
        if gnorm < cfg.grad_tolerance:
            rec.termination = "gradient"
            break
        H = obj.hessian(theta, cfg.hessian_step)
        step, predicted = trust_region_step(g, H, radius)
        snorm = float(np.linalg.norm(step))
        accepted = False
        if predicted > 0:
            trial = theta + step
            f_new, g_new = obj.value_and_grad(trial)
            rho = (f - f_new) / predicted if np.isfinite(f_new) else -np.inf
            if rho < cfg.shrink_ratio:
                radius = 0.5 * radius
            elif rho > cfg.expand_ratio and snorm >= 0.99 * radius:
                radius = min(2.0 * radius, cfg.max_trust_radius)
            if rho > cfg.shrink_ratio and np.all(np.isfinite(g_new)):
                theta, f, g, accepted = trial, f_new, g_new, True
        else:
            radius = 0.5 * radius
        rec.iterations.append(
            {"objective": f, "grad_norm": float(np.linalg.norm(g)), "radius": radius, "accepted": accepted}
        )
        if radius < cfg.min_trust_radius:
            rec.termination = "radius"
            break
    rec.final_objective = f
    rec.params = obj.unflatten(theta)
    return rec


def train(paths, spec: InvestmentSpec, config: TrainConfig = TrainConfig()) -> TrainReport:
    """Run ``config.restarts`` independent descents and keep the lowest objective."""
    t0 = time.perf_counter()
    obj = SampleObjective(paths, spec, hidden=config.hidden)
    logs = []
    for r in range(config.restarts):
        rng = path_rng(config.seed, r)
        for _ in range(config.max_redraws):
            theta = init_params(rng, config.init_scale, config.hidden, spec.n_assets).flat()
            f, g = obj.value_and_grad(theta)
            if np.isfinite(f) and np.all(np.isfinite(g)):
                break
        else:
            raise TrainingError(f"restart {r}: no finite starting point after {config.max_redraws} draws")
        rec = _descend(obj, theta, f, g, config)
        log.info("restart %d: %.6g -> %.6g (%s, %d its)", r, rec.start_objective,
                 rec.final_objective, rec.termination, len(rec.iterations))
        logs.append(rec)
    best = int(np.argmin([rec.final_objective for rec in logs]))
    return TrainReport(logs[best].params, best, logs, time.perf_counter() - t0)


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
