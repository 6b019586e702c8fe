"""Build the 200-row end-to-end fixture under tests/fixtures/.

Whole transactions are taken from a small synthetic market until 198 parcel
rows are used; a two-parcel non-contiguous sale fills the last two rows so
the rejection path is exercised too.

    python scripts/make_fixture.py [--out tests/fixtures]
"""
import argparse
import csv
import io
from collections import OrderedDict
from pathlib import Path

from landex.synth import SynthConfig, generate_market

ROWS = 200

CONFIG = SynthConfig(
    seed=2022,
    n_weeks=12,
    n_bundles=45,
    sales_per_week=14,
    sand_start_week=2,
    settlement_mix={"ETH": 0.6, "WETH": 0.2, "SAND": 0.15, "USDC": 0.05},
)


def build() -> tuple[bytes, bytes]:
    market = generate_market(CONFIG)
    reader = csv.reader(io.StringIO(market.transactions_csv.decode()))
    header = next(reader)
    groups: OrderedDict[str, list[list[str]]] = OrderedDict()
    for row in reader:
        groups.setdefault(row[0], []).append(row)

    kept, used = [], 0
    for rows in groups.values():
        if used + len(rows) <= ROWS - 2:
            kept.extend(rows)
            used += len(rows)
    if used != ROWS - 2:
        raise SystemExit(f"could only fill {used} rows; adjust CONFIG")

    last = kept[-1]
    # parcels (400, 400) and (402, 400) sit outside the generator's blocks and do not touch
    for x in (400, 402):
        kept.append(["txNONCONTIG", last[1], str(x), "400", "0.5", "ETH", "secondary", last[7]])

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(kept)
    return buf.getvalue().encode(), market.prices_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tx, prices = build()
    (out / "transactions.csv").write_bytes(tx)
    (out / "prices.csv").write_bytes(prices)
    n_tx, n_px = len(tx.splitlines()) - 1, len(prices.splitlines()) - 1
    print(f"wrote {n_tx} transaction rows and {n_px} price rows to {out}")


if __name__ == "__main__":
    main()
