"""Coverage of the hedonic control coefficients across seeds.

Prints the z-score (estimate minus truth over robust SE) of the primary,
wETH and SAND terms per seed. Under a correct model about 0.27% of z-scores
exceed 3 in absolute value, so with 60 draws a miss now and then is expected.

    python scripts/premia_coverage.py --seeds 20
"""
import argparse

import numpy as np

from landex.hedonic import PRIMARY, HedonicSpec, hedonic_index, settled_label
from landex.ingest import denominate
from landex.market import USD
from landex.synth import SynthConfig

from _common import simulate

TERMS = (PRIMARY, settled_label("WETH"), settled_label("SAND"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--hc", choices=("HC0", "HC1"), default="HC0")
    args = ap.parse_args()

    zs = []
    for seed in range(args.seeds):
        txs, table, truth = simulate(SynthConfig(seed=seed))
        _, res = hedonic_index(denominate(txs, USD, table).sales, HedonicSpec(hc_type=args.hc))
        row = [(res.coef(t) - truth.beta[t]) / res.se(t) for t in TERMS]
        zs.append(row)
        print(f"seed {seed:3d}  " + "  ".join(f"{t}: {z:+.2f}" for t, z in zip(TERMS, row)))
    zs = np.array(zs)
    print(f"mean z {zs.mean():+.3f}  sd z {zs.std(ddof=1):.3f}  |z| >= 3: {(np.abs(zs) >= 3).sum()}/{zs.size}")


if __name__ == "__main__":
    main()
