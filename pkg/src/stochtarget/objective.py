"""Wealth recursion, outperformance objectives, exact gradients and FD Hessians.

Along each return path, for n = 0..N-1::

    W(t_n+)     = W(t_n-) + q
    W(t_{n+1}-) = p(F(t_n)) . R(t_n) * W(t_n+)

with W(t_0-) = 0 and terminal wealth W(T) = W(t_N-) (no injection at T).
The benchmark follows the same recursion with fixed weights. Features are
taken from pre-injection wealth at t_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import PathSet

try:
    from . import _kernel
except ImportError:  # numba missing: pure-numpy path only
    _kernel = None
from .policy import N_FEATURES, PolicyParams, features, hidden_layer, softmax

MODES = ("asymmetric", "shortfall_vs_elevated", "shortfall_vs_benchmark")


@dataclass(frozen=True)
class InvestmentSpec:
    n_periods: int = 30
    horizon: float = 30.0
    q: float = 10.0
    benchmark_weights: tuple = (0.5, 0.5)
    spread: float = 0.01
    mode: str = "asymmetric"
    epsilon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "benchmark_weights", tuple(float(w) for w in self.benchmark_weights))
        w = np.array(self.benchmark_weights)
        if self.n_periods < 1 or not self.horizon > 0 or self.q < 0:
            raise ValueError("need n_periods >= 1, horizon > 0, q >= 0")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("benchmark weights must be non-negative and sum to 1")
        if not self.epsilon > 0 or self.spread < 0:
            raise ValueError("need epsilon > 0 and spread >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def n_assets(self) -> int:
        return len(self.benchmark_weights)

    @property
    def w_norm(self) -> float:
        return self.q * self.n_periods if self.q > 0 else 1.0

    @property
    def target_multiplier(self) -> float:
        """e^{sT}; 1 for the plain benchmark-shortfall mode."""
        if self.mode == "shortfall_vs_benchmark":
            return 1.0
        return math.exp(self.spread * self.horizon)

    def times(self) -> np.ndarray:
        return np.arange(self.n_periods + 1) * (self.horizon / self.n_periods)


@dataclass
class WealthTrajectories:
    """Columns 0..N-1 hold W(t_n+); column N holds W(T)."""

    adaptive: np.ndarray  # (L, N+1)
    benchmark: np.ndarray  # (L, N+1)
    allocations: np.ndarray  # (L, N, M)
    times: np.ndarray = field(default=None)

    @property
    def terminal(self) -> np.ndarray:
        return self.adaptive[:, -1]

    @property
    def terminal_benchmark(self) -> np.ndarray:
        return self.benchmark[:, -1]


def g(x):
    x = np.asarray(x, dtype=float)
    return np.minimum(x, 0.0) ** 2 + np.maximum(x, 0.0)


def g_bar(x, eps: float):
    """C^1 smoothing of g; differs from g by at most eps/4 (at x = 0)."""
    x = np.asarray(x, dtype=float)
    mid = x * x / (4 * eps) + 0.5 * x + 0.25 * eps
    return np.where(x > eps, x, np.where(x < -eps, (x + eps) ** 2, mid))


def g_bar_prime(x, eps: float):
    x = np.asarray(x, dtype=float)
    return np.where(x > eps, 1.0, np.where(x < -eps, 2 * (x + eps), x / (2 * eps) + 0.5))


def _loss(d, spec: InvestmentSpec):
    if spec.mode == "asymmetric":
        return g_bar(d, spec.epsilon), g_bar_prime(d, spec.epsilon)
    neg = np.minimum(d, 0.0)
    return neg * neg, 2 * neg


def _as_returns(paths) -> np.ndarray:
    r = paths.returns if isinstance(paths, PathSet) else np.asarray(paths, dtype=float)
    return r[None] if r.ndim == 2 else r


def benchmark_wealth(returns: np.ndarray, spec: InvestmentSpec) -> np.ndarray:
    """Pre-injection benchmark wealth W_b(t_n-), shape (L, N+1)."""
    R = _as_returns(returns)
    L, N, _ = R.shape
    pb = np.array(spec.benchmark_weights)
    growth = R @ pb  # (L, N)
    Wb = np.zeros((L, N + 1))
    for n in range(N):
        Wb[:, n + 1] = growth[:, n] * (Wb[:, n] + spec.q)
    return Wb


class SampleObjective:
    """Sample-average objective over a fixed set of return paths, in flat-weight form."""

    def __init__(self, paths, spec: InvestmentSpec, hidden: int = 3, backend: str = "auto"):
        R = _as_returns(paths)
        if R.shape[1] != spec.n_periods:
            raise ValueError(f"paths have {R.shape[1]} periods, spec expects {spec.n_periods}")
        if R.shape[2] != spec.n_assets:
            raise ValueError(f"paths have {R.shape[2]} assets, spec expects {spec.n_assets}")
        self.R = R
        self.spec = spec
        self.hidden = hidden
        self.Wb = benchmark_wealth(R, spec)
        self.target = spec.target_multiplier * self.Wb[:, -1]
        self.t = spec.times()
        self.n_calls = 0
        if backend == "auto":
            backend = "numba" if _kernel is not None else "numpy"
        if backend not in ("numba", "numpy") or (backend == "numba" and _kernel is None):
            raise ValueError(f"unavailable backend {backend!r}")
        self.backend = backend

    @property
    def n_params(self) -> int:
        return N_FEATURES * self.hidden + self.hidden * self.spec.n_assets

    def unflatten(self, theta) -> PolicyParams:
        return PolicyParams.from_flat(theta, N_FEATURES, self.hidden, self.spec.n_assets)

    def _check(self, params: PolicyParams):
        if params.n_assets != self.spec.n_assets or params.d != N_FEATURES:
            raise ValueError("policy shape does not match paths/spec")

    def _forward(self, params: PolicyParams, keep: bool):
        spec, R = self.spec, self.R
        L, N, _ = R.shape
        W = np.zeros(L)
        cache = []
        for n in range(N):
            F = features(self.t[n], W, self.Wb[:, n], spec.horizon, spec.w_norm)
            h = hidden_layer(F, params.z)
            p = softmax(h @ params.x)
            a = W + spec.q
            growth = np.einsum("lm,lm->l", p, R[:, n])
            if keep:
                cache.append((F, h, p, a, growth))
            W = growth * a
        return W, cache

    def value(self, theta) -> float:
        params = theta if isinstance(theta, PolicyParams) else self.unflatten(theta)
        self._check(params)
        self.n_calls += 1
        if self.backend == "numba":
            return float(self._kernel_call(params, False)[0])
        WT, _ = self._forward(params, keep=False)
        loss, _ = _loss(WT - self.target, self.spec)
        return float(loss.mean())

    def _kernel_call(self, params: PolicyParams, want_grad: bool):
        spec = self.spec
        mode = _kernel.ASYMMETRIC if spec.mode == "asymmetric" else _kernel.SHORTFALL
        return _kernel.value_and_grad(
            self.R, self.Wb, self.target, self.t, params.z, params.x, float(spec.q),
            float(spec.horizon), float(spec.w_norm), mode, float(spec.epsilon), want_grad,
        )

    def value_and_grad(self, theta):
        params = theta if isinstance(theta, PolicyParams) else self.unflatten(theta)
        self._check(params)
        self.n_calls += 1
        if self.backend == "numba":
            f, dz, dx = self._kernel_call(params, True)
            return float(f), np.concatenate([dz.ravel(), dx.ravel()])
        spec, R = self.spec, self.R
        L = R.shape[0]
        WT, cache = self._forward(params, keep=True)
        loss, dloss = _loss(WT - self.target, spec)
        lam = dloss / L  # dJ/dW(t_{n+1}-)
        dz = np.zeros_like(params.z)
        dx = np.zeros_like(params.x)
        for n in range(spec.n_periods - 1, -1, -1):
            F, h, p, a, growth = cache[n]
            v = (lam * a)[:, None] * R[:, n]  # dJ/dp
            du = p * (v - np.einsum("lm,lm->l", p, v)[:, None])
            dx += h.T @ du
            ds = (du @ params.x.T) * (-h * (1.0 - h))
            dz += F.T @ ds
            dF = ds @ params.z.T
            lam = lam * growth + dF[:, 1] / spec.w_norm
        return float(loss.mean()), np.concatenate([dz.ravel(), dx.ravel()])

    def grad(self, theta) -> np.ndarray:
        return self.value_and_grad(theta)[1]

    def hessian(self, theta, step: float = 1e-5) -> np.ndarray:
        """Central differences of the analytic gradient, symmetrized."""
        if step <= 0:
            raise ValueError("step must be positive")
        theta = np.asarray(theta, dtype=float)
        n = theta.size
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            H[:, i] = (self.grad(theta + e) - self.grad(theta - e)) / (2 * step)
        return 0.5 * (H + H.T)

    def trajectories(self, params: PolicyParams) -> WealthTrajectories:
        self._check(params)
        spec = self.spec
        L, N, M = self.R.shape
        WT, cache = self._forward(params, keep=True)
        adaptive = np.empty((L, N + 1))
        bench = np.empty((L, N + 1))
        alloc = np.empty((L, N, M))
        for n, (_, _, p, a, _) in enumerate(cache):
            adaptive[:, n] = a
            alloc[:, n] = p
            bench[:, n] = self.Wb[:, n] + spec.q
        adaptive[:, N] = WT
        bench[:, N] = self.Wb[:, N]
        return WealthTrajectories(adaptive, bench, alloc, self.t)


def simulate_wealth(params: PolicyParams, paths, spec: InvestmentSpec) -> WealthTrajectories:
    return SampleObjective(paths, spec, hidden=params.hidden).trajectories(params)


def sample_objective(params: PolicyParams, paths, spec: InvestmentSpec) -> float:
    return SampleObjective(paths, spec, hidden=params.hidden).value(params)


def gradient(params: PolicyParams, paths, spec: InvestmentSpec) -> np.ndarray:
    """d(sample_objective)/d(z, x), flattened as [z.ravel(), x.ravel()]."""
    return SampleObjective(paths, spec, hidden=params.hidden).grad(params)


def fd_hessian(params: PolicyParams, paths, spec: InvestmentSpec, step: float = 1e-5) -> np.ndarray:
    return SampleObjective(paths, spec, hidden=params.hidden).hessian(params.flat(), step)


def constant_allocation_objective(terminal_benchmark, spec: InvestmentSpec) -> float:
    """Objective value when the policy reproduces the benchmark weights exactly."""
    d = (1.0 - spec.target_multiplier) * np.asarray(terminal_benchmark, dtype=float)
    return float(_loss(d, spec)[0].mean())
