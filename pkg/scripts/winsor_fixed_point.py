"""Does a second winsorization pass change anything?

Interpolated quantile bounds move once the tail is clipped, so applying the
same quantiles again pulls the extremes in further. This prints the first
few passes on a small vector and the share of random vectors a second pass
changes.

    python scripts/winsor_fixed_point.py
"""
from decimal import Decimal

import numpy as np

from landex.ingest import WinsorBounds, winsorize


def main():
    bounds = WinsorBounds(0.0, 0.8)
    xs = [Decimal(v) for v in (1, 2, 3, 4, 100)]
    for i in range(4):
        xs = winsorize(xs, bounds)
        print(f"pass {i + 1}: {[str(v) for v in xs]}")

    rng = np.random.default_rng(0)
    changed = 0
    for _ in range(1000):
        v = rng.lognormal(0, 1.5, size=int(rng.integers(2, 200))).tolist()
        once = winsorize(v, WinsorBounds())
        changed += winsorize(once, WinsorBounds()) != once
    print(f"default bounds: second pass changed {changed}/1000 random vectors")


if __name__ == "__main__":
    main()
