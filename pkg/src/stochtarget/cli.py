"""Command-line pipeline: ingest, bootstrap, simulate, train, evaluate, backtest, verify-theorems.

Settings resolve as: built-in defaults < ``--preset paper`` < ``--config`` file < flags.
Config files hold ``key = value`` lines whose keys are flag names without the
leading dashes (``blocksize-months = 6``). Exit codes: 0 ok, 2 input/config
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bootstrap as bs
from . import evaluate as ev
from . import kou
from .market_data import DataError, load_index_csv, load_panel_csv, panel_from_indexes, write_panel_csv, compound_to_periods
from .objective import InvestmentSpec, simulate_wealth
from .paths import load_pathset, save_pathset
from .policy import constant_policy, load_params, save_params
from .trainer import TrainConfig, TrainingError, train

log = logging.getLogger("stochtarget")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

OBJECTIVES = {
    "asymmetric": "asymmetric",
    "shortfall": "shortfall_vs_benchmark",
    "shortfall-elevated": "shortfall_vs_elevated",
}

# experiment settings: 30 annual periods, q = 10, s = 1%, 100k train paths
PUBLISHED_PRESET = {
    "paths": "100000",
    "periods": "30",
    "horizon": "30",
    "q": "10",
    "spread": "0.01",
    "dt": "1.0",
    "months-per-period": "12",
    "benchmark": "0.5,0.5",
}


class InputError(Exception):
    pass


def read_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {p}")
    out = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{p}: line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("_", "-")] = v
    return out


def _existing(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputError(f"file not found: {p}")
    return p


def _pathset_file(path) -> Path:
    p = Path(path)
    stem = p.with_suffix("") if p.suffix in (".npy", ".json") else p
    if not stem.with_suffix(".npy").exists():
        raise InputError(f"file not found: {stem.with_suffix('.npy')}")
    return stem


def _weights(text: str) -> tuple:
    try:
        w = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"bad weight list {text!r}") from None
    return w


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _spec_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("investment setting")
    g.add_argument("--objective", choices=sorted(OBJECTIVES), default="asymmetric")
    g.add_argument("--spread", type=float, default=0.01, help="target outperformance per year")
    g.add_argument("--q", type=float, default=10.0, help="cash injection per rebalance time")
    g.add_argument("--horizon", type=float, default=None, help="years; defaults to periods * dt")
    g.add_argument("--epsilon", type=float, default=1.0, help="smoothing width")
    g.add_argument("--benchmark", default="0.5,0.5", help="constant benchmark weights")


def _make_spec(args, n_periods: int, dt: float = 1.0) -> InvestmentSpec:
    horizon = args.horizon if args.horizon is not None else n_periods * dt
    return InvestmentSpec(
        n_periods=n_periods,
        horizon=horizon,
        q=args.q,
        benchmark_weights=_weights(args.benchmark),
        spread=args.spread,
        mode=OBJECTIVES[args.objective],
        epsilon=args.epsilon,
    )


def _policy_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--params", help="policy weights file written by train")
    g.add_argument("--constant-policy", help="comma-separated fixed weights, e.g. 0.5,0.5")


def _load_policy(args, n_assets: int):
    if args.params:
        params = load_params(_existing(args.params))
    else:
        params = constant_policy(_weights(args.constant_policy))
    if params.n_assets != n_assets:
        raise InputError(f"policy has {params.n_assets} outputs but paths have {n_assets} assets")
    return params


def _dt_of(ps) -> float:
    prov = ps.provenance
    if "dt" in prov:
        return float(prov["dt"])
    return 1.0


# --- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    indexes = []
    for item in args.index:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            name, path = None, item
        series = load_index_csv(_existing(path))
        if name:
            series = type(series)(series.dates, series.levels, name=name)
        indexes.append(series)
    cpi = load_index_csv(_existing(args.cpi)) if args.cpi else None
    panel = panel_from_indexes(indexes, cpi)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel, args.out)
    print(f"wrote {panel.n_months} months x {panel.n_assets} assets to {args.out}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    panel = load_panel_csv(_existing(args.panel))
    months = args.periods * args.months_per_period
    cfg = bs.BootstrapConfig(args.mode, args.blocksize_months, months, args.seed)
    ps = bs.resample_period_set(panel, cfg, args.paths, args.months_per_period, workers=args.workers)
    ps.provenance["dt"] = args.months_per_period / 12.0
    npy, _ = save_pathset(ps, args.out)
    print(f"wrote {ps.n_paths} paths x {ps.n_periods} periods x {ps.n_assets} assets to {npy}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = kou.load_params(_existing(args.kou_params)) if args.kou_params else kou.default_params()
    ps = kou.simulate_panel(params, args.periods, args.dt, args.paths, args.seed, workers=args.workers)
    npy, _ = save_pathset(ps, args.out)
    print(f"wrote {ps.n_paths} synthetic paths x {ps.n_periods} periods to {npy}")
    return EXIT_OK


def cmd_train(args) -> int:
    ps = load_pathset(_pathset_file(args.paths_file))
    spec = _make_spec(args, ps.n_periods, _dt_of(ps))
    cfg = TrainConfig(
        max_iterations=args.max_iter,
        grad_tolerance=args.grad_tol,
        restarts=args.restarts,
        seed=args.seed,
        init_scale=args.init_scale,
        hidden=args.hidden,
    )
    report = train(ps, spec, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_params(report.best_params, out / "params.txt")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    log.info("training wall time %.1fs", report.wall_time)
    print(f"best objective {report.best_objective:.10g} (restart {report.best_restart}); "
          f"wrote {out / 'params.txt'} and {out / 'report.json'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ps = load_pathset(_pathset_file(args.paths_file))
    spec = _make_spec(args, ps.n_periods, _dt_of(ps))
    params = _load_policy(args, ps.n_assets)
    traj = simulate_wealth(params, ps, spec)
    summary = ev.write_evaluation_bundle(traj, args.out_dir)
    cp, nn = summary["constant_proportion"], summary["adaptive"]
    print(f"{'strategy':<22}{'E':>10}{'std':>10}{'median':>10}{'Pr<medCP':>10}{'Pr<medNN':>10}")
    for name, row in (("constant proportion", cp), ("adaptive", nn)):
        print(f"{name:<22}{row['E']:>10.1f}{row['std']:>10.1f}{row['median']:>10.1f}"
              f"{row['Pr_below_median_CP']:>10.3f}{row['Pr_below_median_NN']:>10.3f}")
    print(f"pathwise Pr(W_NN < W_CP) = {summary['pathwise_Pr_NN_below_CP']:.4f}")
    return EXIT_OK


def cmd_backtest(args) -> int:
    panel = load_panel_csv(_existing(args.returns))
    if panel.n_months % args.months_per_period:
        raise InputError(f"{panel.n_months} rows is not a multiple of {args.months_per_period}")
    path = compound_to_periods(panel.returns, args.months_per_period)
    spec = _make_spec(args, path.shape[0], args.months_per_period / 12.0 if args.horizon is None else 1.0)
    params = _load_policy(args, path.shape[1])
    traj = ev.backtest_single_path(params, path, spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    names = list(panel.asset_names)
    ev.write_csv(args.out, ["time", "W_adaptive", "W_benchmark", *(f"p_{n}" for n in names)],
                 ev.backtest_rows(traj))
    print(f"W(T) adaptive {traj.terminal[0]:.2f}, benchmark {traj.terminal_benchmark[0]:.2f}; wrote {args.out}")
    return EXIT_OK


MC_WORK_LIMIT = 2e8


def cmd_verify_theorems(args) -> int:
    res = bs.prob_identical(args.N, args.n_tot, args.mode, args.b1, args.b2)
    report = {
        "N": args.N, "n_tot": args.n_tot, "mode": args.mode, "b1": args.b1, "b2": args.b2,
        "log_probability": res.log_value,
        "log10_probability": res.log10_value,
        "probability": res.value,
    }
    print(f"closed form: P = {res.value:.6g}  (ln P = {res.log_value:.10g}, log10 P = {res.log10_value:.6f})")
    expected_hits = res.value * args.mc_trials
    if args.mc_trials > 0 and args.N * args.mc_trials <= MC_WORK_LIMIT and expected_hits >= 10:
        c1 = bs.BootstrapConfig(args.mode, args.b1, args.N, args.seed)
        c2 = bs.BootstrapConfig(args.mode, args.b2, args.N, args.seed)
        est, _ = bs.mc_prob_identical(c1, c2, args.n_tot, args.mc_trials, np.random.default_rng(args.seed))
        # binomial standard error at the closed-form value
        se = math.sqrt(res.value * (1 - res.value) / args.mc_trials)
        z = (est - res.value) / se if se > 0 else (0.0 if est == res.value else math.inf)
        report.update(mc_estimate=est, mc_standard_error=se, mc_trials=args.mc_trials, z_score=z,
                      agrees_within_3se=abs(z) <= 3)
        print(f"Monte Carlo: {est:.6g} +/- {se:.3g} over {args.mc_trials} pairs; "
              f"z = {z:.3f} -> {'agrees' if abs(z) <= 3 else 'DISAGREES'} within 3 SE")
    else:
        report["mc_skipped"] = "instance too large or probability too small for Monte Carlo"
        print("notice: Monte Carlo skipped (instance too large or probability too small); closed form only")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochtarget", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--preset", choices=["paper"], help="load the published experiment settings")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "index CSVs (+ CPI) -> real monthly return panel CSV")
    p.add_argument("--index", action="append", required=True, metavar="NAME=CSV")
    p.add_argument("--cpi", help="CPI index CSV used to deflate every index")
    p.add_argument("--out", required=True)

    p = add("bootstrap", cmd_bootstrap, "block-bootstrap a panel into a PathSet")
    p.add_argument("--panel", required=True)
    p.add_argument("--mode", choices=bs.MODES, default="stationary")
    p.add_argument("--blocksize-months", type=float, default=6.0)
    p.add_argument("--paths", type=_positive_int, default=1000)
    p.add_argument("--periods", type=_positive_int, default=30)
    p.add_argument("--months-per-period", type=_positive_int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("simulate", cmd_simulate, "simulate jump-diffusion stock / bond PathSet")
    p.add_argument("--kou-params", help="key = value file (mu sigma lambda p_up eta1 eta2 r)")
    p.add_argument("--paths", type=_positive_int, default=1000)
    p.add_argument("--periods", type=_positive_int, default=30)
    p.add_argument("--dt", type=float, default=1.0, help="period length in years")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train the allocation network on a PathSet")
    p.add_argument("--paths-file", required=True)
    _spec_args(p)
    p.add_argument("--hidden", type=_positive_int, default=3)
    p.add_argument("--restarts", type=_positive_int, default=5)
    p.add_argument("--max-iter", type=_positive_int, default=200)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--init-scale", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = add("evaluate", cmd_evaluate, "terminal-wealth tables, fans, heatmap, CDF for a policy")
    p.add_argument("--paths-file", required=True)
    _policy_args(p)
    _spec_args(p)
    p.add_argument("--out-dir", required=True)

    p = add("backtest", cmd_backtest, "run a policy along one historical return path")
    p.add_argument("--returns", required=True, help="return panel CSV (date,<assets>...)")
    p.add_argument("--months-per-period", type=_positive_int, default=1,
                   help="rows compounded per rebalance period (1: rows already are periods)")
    _policy_args(p)
    _spec_args(p)
    p.add_argument("--out", required=True)

    p = add("verify-theorems", cmd_verify_theorems, "identical-path probabilities, closed form vs Monte Carlo")
    p.add_argument("--N", type=_positive_int, required=True, help="path length")
    p.add_argument("--n-tot", type=_positive_int, required=True, help="number of source observations")
    p.add_argument("--mode", choices=bs.MODES, default="stationary")
    p.add_argument("--b1", type=float, required=True)
    p.add_argument("--b2", type=float, required=True)
    p.add_argument("--mc-trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="optional JSON report")
    return parser


def _layered_defaults(parser, argv):
    """Apply preset and config-file values as subparser defaults so flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("--preset")
    known, _ = pre.parse_known_args(argv)
    layers = {}
    if known.preset == "paper":
        layers.update(PUBLISHED_PRESET)
    if known.config:
        layers.update(read_config(known.config))
    if not layers:
        return
    cmd = next((a for a in argv if not a.startswith("-")), None)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices.get(cmd)
    if sp is None:
        return
    dests = {a.option_strings[0].lstrip("-"): a for a in sp._actions if a.option_strings}
    defaults = {}
    for key, value in layers.items():
        action = dests.get(key)
        if action is None:
            if known.config and key not in PUBLISHED_PRESET:
                raise InputError(f"unknown config key {key!r} for command {cmd}")
            continue
        defaults[action.dest] = value
        action.required = False
    sp.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _layered_defaults(parser, argv)
        args = parser.parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TrainingError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
