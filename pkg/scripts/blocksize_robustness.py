"""Train on bootstrap paths with one expected blocksize, test on others.

With ``--panel`` the monthly real-return panel written by ``stochtarget ingest``
is resampled. Without it a 90-year monthly series is simulated from the
jump-diffusion defaults so the script runs out of the box.

    python3 scripts/blocksize_robustness.py --panel panel.csv --train-blocksize 6 --test-blocksizes 1,3,12,24
"""
import argparse
import json
import logging


from stochtarget import bootstrap as bs
from stochtarget.evaluate import summary_table
from stochtarget.kou import default_params, simulate_panel
from stochtarget.market_data import AssetPanel, load_panel_csv
from stochtarget.objective import InvestmentSpec, simulate_wealth
from stochtarget.trainer import TrainConfig, train


def demo_panel(months=1080, seed=99):
    ps = simulate_panel(default_params(), months, 1.0 / 12, 1, seed)
    dates = tuple(f"{1926 + m // 12}-{m % 12 + 1:02d}" for m in range(months))
    return AssetPanel(dates, ps.returns[0], ("stock", "bond"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--panel")
    ap.add_argument("--train-blocksize", type=float, default=6.0)
    ap.add_argument("--test-blocksizes", default="1,3,12,24,60")
    ap.add_argument("--paths", type=int, default=5000)
    ap.add_argument("--restarts", type=int, default=2)
    ap.add_argument("--max-iter", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    panel = load_panel_csv(args.panel) if args.panel else demo_panel()
    spec = InvestmentSpec()
    months = spec.n_periods * 12

    def paths(b, seed):
        return bs.resample_period_set(panel, bs.BootstrapConfig("stationary", b, months, seed), args.paths, 12)

    report = train(paths(args.train_blocksize, args.seed), spec,
                   TrainConfig(max_iterations=args.max_iter, restarts=args.restarts, seed=args.seed))
    rows = {}
    for i, b in enumerate([args.train_blocksize] + [float(v) for v in args.test_blocksizes.split(",")]):
        s = summary_table(simulate_wealth(report.best_params, paths(b, args.seed + 1000 + i), spec))
        rows[f"{b:g}"] = {
            "median_NN": s["adaptive"]["median"],
            "median_CP": s["constant_proportion"]["median"],
            "Pr_NN_below_median_CP": s["adaptive"]["Pr_below_median_CP"],
            "pathwise_Pr_NN_below_CP": s["pathwise_Pr_NN_below_CP"],
        }
    print(json.dumps(rows, indent=2))
    print("median ratio by test blocksize:",
          {k: round(v["median_NN"] / v["median_CP"], 3) for k, v in rows.items()})


if __name__ == "__main__":
    main()
