"""Terminal-wealth statistics, percentile fans, allocation heatmaps, backtests, CSV export.

Quantiles use the averaged inverted-CDF rule: the midpoint of the two
bracketing order statistics when q*L is an integer, the next order statistic
otherwise. VaR is reported as a wealth quantile (larger is better).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .objective import InvestmentSpec, WealthTrajectories, simulate_wealth
from .policy import PolicyParams

FAN_LEVELS = (5, 20, 50, 80, 95)
QUANTILE_METHOD = "averaged_inverted_cdf"


class InsufficientSample(ValueError):
    pass


def quantile(samples, q):
    return np.quantile(np.asarray(samples, dtype=float), q, method=QUANTILE_METHOD)


@dataclass
class WealthStats:
    mean: float
    std: float
    median: float
    var_at_level: dict = field(default_factory=dict)  # 0.9 -> 10th percentile of W_T
    prob_below: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "median": self.median,
            "var": {f"{k:g}": v for k, v in self.var_at_level.items()},
            "prob_below": {f"{k:g}": v for k, v in self.prob_below.items()},
        }


def wealth_stats(samples, var_levels=(0.9, 0.95), thresholds=()) -> WealthStats:
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise InsufficientSample("need at least 2 samples")
    return WealthStats(
        mean=float(x.mean()),
        std=float(x.std(ddof=1)),
        median=float(quantile(x, 0.5)),
        var_at_level={a: float(quantile(x, round(1 - a, 12))) for a in var_levels},  # 1 - 0.9 != 0.1
        prob_below={float(c): float(np.mean(x < c)) for c in sorted(thresholds)},
    )


def terminal_stats(traj: WealthTrajectories, which: str = "adaptive", var_levels=(0.9, 0.95),
                   thresholds=()) -> WealthStats:
    if which == "adaptive":
        x = traj.terminal
    elif which == "benchmark":
        x = traj.terminal_benchmark
    else:
        raise ValueError("which must be 'adaptive' or 'benchmark'")
    return wealth_stats(x, var_levels, thresholds)


def cross_prob(adaptive_wt, benchmark_wt) -> tuple[float, float, float]:
    """(P[W_NN < median W_CP], P[W_CP < median W_NN], pathwise P[W_NN < W_CP])."""
    a = np.asarray(adaptive_wt, dtype=float)
    b = np.asarray(benchmark_wt, dtype=float)
    if a.shape != b.shape:
        raise ValueError("adaptive and benchmark samples are not path-aligned")
    return (
        float(np.mean(a < quantile(b, 0.5))),
        float(np.mean(b < quantile(a, 0.5))),
        float(np.mean(a < b)),
    )


def summary_table(traj: WealthTrajectories) -> dict:
    """Both strategies side by side: E, std, median, Pr < median CP, Pr < median NN."""
    nn, cp = traj.terminal, traj.terminal_benchmark
    med_cp, med_nn = quantile(cp, 0.5), quantile(nn, 0.5)
    rows = {}
    for name, x in (("constant_proportion", cp), ("adaptive", nn)):
        s = wealth_stats(x)
        rows[name] = {
            "E": s.mean,
            "std": s.std,
            "median": s.median,
            "Pr_below_median_CP": float(np.mean(x < med_cp)),
            "Pr_below_median_NN": float(np.mean(x < med_nn)),
            "VaR90": s.var_at_level[0.9],
            "VaR95": s.var_at_level[0.95],
        }
    rows["pathwise_Pr_NN_below_CP"] = cross_prob(nn, cp)[2]
    return rows


def cdf_table(samples) -> np.ndarray:
    """Rows (value, k/L) over sorted samples."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size < 1:
        raise InsufficientSample("need at least 1 sample")
    return np.column_stack([x, np.arange(1, x.size + 1) / x.size])


def cdf_export(samples, path, header=("value", "cdf")) -> np.ndarray:
    table = cdf_table(samples)
    write_csv(path, header, table)
    return table


@dataclass
class PercentileFan:
    times: np.ndarray
    levels: tuple
    percentiles: np.ndarray  # (len(levels), N+1)
    mean: np.ndarray

    def rows(self):
        for i, t in enumerate(self.times):
            yield [t, *self.percentiles[:, i], self.mean[i]]

    @property
    def header(self):
        return ["time", *(f"p{lv:g}" for lv in self.levels), "mean"]


def percentile_fan(traj: WealthTrajectories, statistic: str = "wealth_diff", levels=FAN_LEVELS,
                   asset: int = 0) -> PercentileFan:
    if statistic == "wealth_diff":
        values = traj.adaptive - traj.benchmark
        times = traj.times
    elif statistic == "relative_wealth_diff":
        values = (traj.adaptive - traj.benchmark) / traj.benchmark
        times = traj.times
    elif statistic == "stock_allocation":
        values = traj.allocations[:, :, asset]
        times = traj.times[:-1]
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    pct = np.quantile(values, np.asarray(levels, dtype=float) / 100, axis=0, method=QUANTILE_METHOD)
    return PercentileFan(np.asarray(times), tuple(levels), pct, values.mean(axis=0))


@dataclass
class HeatmapGrid:
    time_edges: np.ndarray
    diff_edges: np.ndarray
    mean: np.ndarray  # (time bins, diff bins); NaN where empty
    count: np.ndarray

    def rows(self):
        for i in range(len(self.time_edges) - 1):
            for j in range(len(self.diff_edges) - 1):
                yield [self.time_edges[i], self.time_edges[i + 1], self.diff_edges[j],
                       self.diff_edges[j + 1], int(self.count[i, j]),
                       "" if self.count[i, j] == 0 else self.mean[i, j]]

    header = ["t_lo", "t_hi", "diff_lo", "diff_hi", "count", "mean_allocation"]


def allocation_heatmap(traj: WealthTrajectories, time_edges, diff_edges, asset: int = 0) -> HeatmapGrid:
    """Mean allocation to ``asset`` per (rebalance time, W - W_b) cell.

    Observations outside the outer edges go to the nearest edge cell, so
    counts always sum to L*N.
    """
    te = np.asarray(time_edges, dtype=float)
    de = np.asarray(diff_edges, dtype=float)
    if te.size < 2 or de.size < 2:
        raise ValueError("need at least one time bin and one difference bin")
    L, N, _ = traj.allocations.shape
    t = np.broadcast_to(traj.times[:N], (L, N)).ravel()
    diff = (traj.adaptive[:, :N] - traj.benchmark[:, :N]).ravel()
    alloc = traj.allocations[:, :, asset].ravel()
    ti = np.clip(np.searchsorted(te, t, side="right") - 1, 0, te.size - 2)
    di = np.clip(np.searchsorted(de, diff, side="right") - 1, 0, de.size - 2)
    shape = (te.size - 1, de.size - 1)
    flat = ti * shape[1] + di
    count = np.bincount(flat, minlength=shape[0] * shape[1]).reshape(shape)
    total = np.bincount(flat, weights=alloc, minlength=shape[0] * shape[1]).reshape(shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return HeatmapGrid(te, de, mean, count)


def backtest_single_path(params: PolicyParams, historical, spec: InvestmentSpec) -> WealthTrajectories:
    r = np.asarray(historical, dtype=float)
    if r.ndim != 2 or r.shape[0] != spec.n_periods:
        raise ValueError(f"historical path must have shape ({spec.n_periods}, M), got {r.shape}")
    return simulate_wealth(params, r[None], spec)


def backtest_rows(traj: WealthTrajectories):
    """Per rebalance time: t, W, W_b, allocation vector (blank at T)."""
    N = traj.allocations.shape[1]
    M = traj.allocations.shape[2]
    for n in range(N + 1):
        alloc = list(traj.allocations[0, n]) if n < N else [""] * M
        yield [traj.times[n], traj.adaptive[0, n], traj.benchmark[0, n], *alloc]


def write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_evaluation_bundle(traj: WealthTrajectories, out_dir, asset_names=None, heatmap_bins=None) -> dict:
    """Summary JSON plus terminal-wealth, CDF, fan and heatmap CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_table(traj)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    write_csv(out / "terminal_wealth.csv", ["path", "W_adaptive", "W_benchmark"],
              ([i, a, b] for i, (a, b) in enumerate(zip(traj.terminal, traj.terminal_benchmark))))
    write_csv(out / "cdf_wealth_diff.csv", ["wealth_diff", "cdf"],
              cdf_table(traj.terminal - traj.terminal_benchmark))
    for stat in ("wealth_diff", "relative_wealth_diff", "stock_allocation"):
        fan = percentile_fan(traj, stat)
        write_csv(out / f"fan_{stat}.csv", fan.header, fan.rows())
    if heatmap_bins is None:
        diff = traj.adaptive[:, :-1] - traj.benchmark[:, :-1]
        lo, hi = np.quantile(diff, [0.01, 0.99])
        heatmap_bins = (traj.times, np.linspace(lo, hi, 21))
    grid = allocation_heatmap(traj, *heatmap_bins)
    write_csv(out / "heatmap_allocation.csv", HeatmapGrid.header, grid.rows())
    return summary
