"""Fixed and stationary (circular) block bootstrap of monthly return panels.

Also the closed-form probabilities that two independently resampled paths
coincide, and a brute-force Monte Carlo estimator used to check them.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .market_data import AssetPanel, compound_to_periods
from .paths import PathSet, array_checksum

MODES = ("fixed", "stationary")


@dataclass(frozen=True)
class BootstrapConfig:
    mode: str = "stationary"
    blocksize: float = 6.0  # expected blocksize (stationary) or fixed blocksize, months
    path_length_months: int = 360
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.path_length_months < 1:
            raise ValueError("path_length_months must be >= 1")
        if self.mode == "stationary" and not self.blocksize >= 1:
            raise ValueError("expected blocksize must be >= 1")
        if self.mode == "fixed" and (self.blocksize < 1 or self.blocksize != int(self.blocksize)):
            raise ValueError("fixed blocksize must be a positive integer")


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for path ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_blocksize(b_hat: float, rng: np.random.Generator, size=None):
    """Shifted geometric draw on {1, 2, ...} with mean ``b_hat``."""
    if not b_hat >= 1:
        raise ValueError("expected blocksize must be >= 1")
    if b_hat == 1:
        return 1 if size is None else np.ones(size, dtype=np.int64)
    return rng.geometric(1.0 / b_hat, size=size)


def block_layout(n_tot: int, config: BootstrapConfig, rng: np.random.Generator):
    """Draw (starts, sizes) of the blocks making up one path.

    Starts are 0-based uniform on [0, n_tot). The final size is truncated so
    that ``sizes.sum() == config.path_length_months``.
    """
    if n_tot < 1:
        raise ValueError("cannot resample from an empty panel")
    n = config.path_length_months
    if config.mode == "fixed":
        b = int(config.blocksize)
        k = -(-n // b)
        starts = rng.integers(0, n_tot, size=k)
        sizes = np.full(k, b, dtype=np.int64)
    else:
        chunk = int(math.ceil(n / config.blocksize)) + 8
        starts_parts, size_parts, total = [], [], 0
        while total < n:
            s = rng.integers(0, n_tot, size=chunk)
            z = np.asarray(sample_blocksize(config.blocksize, rng, size=chunk), dtype=np.int64)
            starts_parts.append(s)
            size_parts.append(z)
            total += int(z.sum())
        starts = np.concatenate(starts_parts)
        sizes = np.concatenate(size_parts)
        k = int(np.searchsorted(np.cumsum(sizes), n)) + 1
        starts, sizes = starts[:k], sizes[:k].copy()
    sizes[-1] -= int(sizes.sum()) - n
    return starts, sizes


def layout_to_indices(starts: np.ndarray, sizes: np.ndarray, n_tot: int) -> np.ndarray:
    offsets = np.arange(int(sizes.sum())) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    return (np.repeat(starts, sizes) + offsets) % n_tot


def resample_indices(n_tot: int, config: BootstrapConfig, rng: np.random.Generator) -> np.ndarray:
    starts, sizes = block_layout(n_tot, config, rng)
    return layout_to_indices(starts, sizes, n_tot)


def resample_path(panel: AssetPanel, config: BootstrapConfig, rng: np.random.Generator) -> np.ndarray:
    """One monthly path of shape (path_length_months, M).

    The same row index is used for every asset, so cross-asset dependence
    within a month is preserved.
    """
    idx = resample_indices(panel.n_months, config, rng)
    return panel.returns[idx]


def _resample_chunk(args):
    returns, config, lo, hi = args
    n_tot = returns.shape[0]
    out = np.empty((hi - lo, config.path_length_months, returns.shape[1]))
    for j, i in enumerate(range(lo, hi)):
        out[j] = returns[resample_indices(n_tot, config, path_rng(config.seed, i))]
    return out


def resample_set(panel: AssetPanel, config: BootstrapConfig, n_paths: int, workers: int = 1) -> PathSet:
    """``n_paths`` monthly paths; path i uses stream (config.seed, i)."""
    if n_paths < 1:
        raise ValueError("path count must be >= 1")
    if panel.n_months < 1:
        raise ValueError("cannot resample from an empty panel")
    if workers <= 1:
        data = _resample_chunk((panel.returns, config, 0, n_paths))
    else:
        bounds = np.linspace(0, n_paths, workers + 1).astype(int)
        jobs = [(panel.returns, config, lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            data = np.concatenate(list(ex.map(_resample_chunk, jobs)))
    prov = {
        "source": "bootstrap",
        "granularity": "month",
        **asdict(config),
        "n_tot": panel.n_months,
        "asset_names": list(panel.asset_names),
        "panel_sha256": array_checksum(panel.returns),
    }
    return PathSet(data, prov)


def resample_period_set(
    panel: AssetPanel, config: BootstrapConfig, n_paths: int, months_per_period: int = 12, workers: int = 1
) -> PathSet:
    """Resample monthly, then compound to rebalance periods."""
    monthly = resample_set(panel, config, n_paths, workers=workers)
    prov = dict(monthly.provenance, granularity="period", months_per_period=months_per_period)
    return PathSet(compound_to_periods(monthly.returns, months_per_period), prov)


# --- identical-path probabilities -------------------------------------------


@dataclass(frozen=True)
class IdenticalPathProbability:
    log_value: float
    N: int
    n_tot: int
    mode: str
    b1: float
    b2: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    @property
    def log10_value(self) -> float:
        return self.log_value / math.log(10)


def combined_decision_points(N: int, b1: int, b2: int) -> int:
    """Distinct block-start positions of two fixed-block layouts on 1..N.

    A blocksize that does not divide N leaves a truncated final block, which
    still has its own start.
    """
    def starts(b):
        return -(-N // b)

    return starts(b1) + starts(b2) - starts(math.lcm(b1, b2))


def prob_identical_fixed(N: int, n_tot: int, b1: int, b2: int) -> IdenticalPathProbability:
    """P(two fixed-block paths coincide) = (1/n_tot)^(number of combined block starts).

    When one blocksize divides the other (and both divide N) the exponent
    equals lcm(N/b1, N/b2).
    """
    if n_tot < 1 or N < 1:
        raise ValueError("N and n_tot must be >= 1")
    for b in (b1, b2):
        if b < 1 or b != int(b):
            raise ValueError(f"blocksize {b} must be a positive integer")
    k = combined_decision_points(N, int(b1), int(b2))
    return IdenticalPathProbability(-k * math.log(n_tot), N, n_tot, "fixed", b1, b2)


def prob_identical_stationary(N: int, n_tot: int, b1: float, b2: float) -> IdenticalPathProbability:
    if n_tot < 1 or N < 1:
        raise ValueError("N and n_tot must be >= 1")
    if not (b1 >= 1 and b2 >= 1):
        raise ValueError("expected blocksizes must be >= 1")
    p1, p2 = 1.0 / b1, 1.0 / b2
    base = (1 - p1) * (1 - p2) + (p1 + p2 - p1 * p2) / n_tot
    log_v = -math.log(n_tot) + (N - 1) * math.log(base)
    return IdenticalPathProbability(log_v, N, n_tot, "stationary", b1, b2)


def prob_identical(N: int, n_tot: int, mode: str, b1: float, b2: float) -> IdenticalPathProbability:
    if mode == "fixed":
        return prob_identical_fixed(N, n_tot, b1, b2)
    if mode == "stationary":
        return prob_identical_stationary(N, n_tot, b1, b2)
    raise ValueError(f"unknown mode {mode!r}")


def _batch_symbol_paths(config: BootstrapConfig, n_tot: int, trials: int, rng) -> np.ndarray:
    # Position-wise construction: a new block starts at each position with
    # probability 1/b (always at 0); otherwise the previous index advances by 1.
    n = config.path_length_months
    pos = np.arange(n)
    if config.mode == "fixed":
        new = np.broadcast_to(pos % int(config.blocksize) == 0, (trials, n))
    else:
        new = rng.random((trials, n)) < 1.0 / config.blocksize
        new[:, 0] = True
    starts = rng.integers(0, n_tot, size=(trials, n))
    block_pos = np.maximum.accumulate(np.where(new, pos, 0), axis=1)
    first = np.take_along_axis(starts, block_pos, axis=1)
    return (first + pos - block_pos) % n_tot


def mc_prob_identical(
    config1: BootstrapConfig,
    config2: BootstrapConfig,
    n_tot: int,
    trials: int,
    rng: np.random.Generator,
    batch: int = 250_000,
) -> tuple[float, float]:
    """Fraction of independent path pairs over ``n_tot`` distinct symbols that coincide.

    Returns (estimate, standard error).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if config1.path_length_months != config2.path_length_months:
        raise ValueError("both configs need the same path length")
    hits, done = 0, 0
    while done < trials:
        m = min(batch, trials - done)
        a = _batch_symbol_paths(config1, n_tot, m, rng)
        b = _batch_symbol_paths(config2, n_tot, m, rng)
        hits += int(np.count_nonzero(np.all(a == b, axis=1)))
        done += m
    p = hits / trials
    return p, math.sqrt(p * (1 - p) / trials)
