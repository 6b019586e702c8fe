"""How far the hedonic USD index strays from the generator's truth.

Fits the all-sales index on noisy synthetic markets and reports the largest
absolute log-level error per seed, plus how many seeds stay under a bound.

    python scripts/hedonic_recovery.py --seeds 20 --sigma 0.2
"""
import argparse
import math
import time

import numpy as np

from landex.hedonic import HedonicSpec, hedonic_index
from landex.ingest import denominate
from landex.market import USD
from landex.synth import SynthConfig

from _common import simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--weeks", type=int, default=100)
    ap.add_argument("--sales-per-week", type=float, default=200)
    ap.add_argument("--bundles", type=int, default=8000)
    ap.add_argument("--bound", type=float, default=0.05)
    args = ap.parse_args()

    errs = []
    for seed in range(args.seeds):
        t0 = time.perf_counter()
        cfg = SynthConfig(seed=seed, n_weeks=args.weeks, n_bundles=args.bundles,
                          sales_per_week=args.sales_per_week, noise_base_var=args.sigma**2)
        txs, table, truth = simulate(cfg)
        index, _ = hedonic_index(denominate(txs, USD, table).sales, HedonicSpec())
        true = truth.log_delta[USD]
        err = max(abs(math.log(p.level) - (true[p.week] - true[index.base_week])) for p in index.points)
        errs.append(err)
        print(f"seed {seed:3d}  sales {len(txs):6d}  max |log err| {err:.4f}  ({time.perf_counter() - t0:.1f}s)")
    errs = np.array(errs)
    print(f"mean {errs.mean():.4f}  max {errs.max():.4f}  under {args.bound}: {(errs < args.bound).sum()}/{len(errs)}")


if __name__ == "__main__":
    main()
