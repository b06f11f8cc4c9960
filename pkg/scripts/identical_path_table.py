"""Probability that two bootstrap resamples coincide, for a grid of blocksizes.

Prints log10 probabilities for the fixed and stationary schemes on a
30-year monthly path drawn from 1080 months of history, then spot-checks a
few tiny instances against Monte Carlo.
"""
import argparse
import math

import numpy as np

from stochtarget import bootstrap as bs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=360)
    ap.add_argument("--n-tot", type=int, default=1080)
    ap.add_argument("--blocksizes", default="1,3,6,12,24,60")
    ap.add_argument("--mc-trials", type=int, default=1_000_000)
    args = ap.parse_args()
    sizes = [int(b) for b in args.blocksizes.split(",")]

    for mode in ("fixed", "stationary"):
        print(f"\n{mode}: log10 P(identical), N={args.N}, N_tot={args.n_tot}")
        print("b1\\b2 " + "".join(f"{b:>10d}" for b in sizes))
        for b1 in sizes:
            row = [bs.prob_identical(args.N, args.n_tot, mode, b1, b2).log10_value for b2 in sizes]
            print(f"{b1:>5d} " + "".join(f"{v:>10.1f}" for v in row))

    print("\nMonte Carlo spot checks")
    rng = np.random.default_rng(0)
    for N, n_tot, mode, b1, b2 in [(4, 5, "fixed", 2, 2), (4, 6, "fixed", 1, 4), (6, 6, "fixed", 2, 3),
                                   (3, 4, "stationary", 1.5, 2.0), (4, 6, "stationary", 2.0, 2.0)]:
        exact = bs.prob_identical(N, n_tot, mode, b1, b2).value
        est, _ = bs.mc_prob_identical(bs.BootstrapConfig(mode, b1, N, 0), bs.BootstrapConfig(mode, b2, N, 0),
                                      n_tot, args.mc_trials, rng)
        z = (est - exact) / math.sqrt(exact * (1 - exact) / args.mc_trials)
        print(f"N={N} N_tot={n_tot} {mode:<10} b=({b1:g},{b2:g}): exact {exact:.5g}  MC {est:.5g}  z={z:+.2f}")


if __name__ == "__main__":
    main()
