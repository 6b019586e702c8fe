"""CSV renderers for every emitted artifact.

Floats are written with 12 significant digits so golden files survive
last-bit differences between BLAS builds.
"""
from __future__ import annotations

import csv
import io
import math
from decimal import Decimal
from typing import Iterable, Mapping, Sequence

from .hedonic import PremiumRow, PriceIndex
from .ingest import RejectedGroup
from .market import Transaction, WeekId
from .stats import SummaryStats


def fmt(x) -> str:
    if isinstance(x, Decimal):
        return format(x, "f")
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return format(x, ".12g")


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def index_csv(index: PriceIndex) -> bytes:
    return _csv(
        ["iso_year", "iso_week", "level", "n_obs"],
        ((p.week.iso_year, p.week.iso_week, p.level, p.n_obs) for p in index.points),
    )


def coefs_csv(rows: Sequence[PremiumRow]) -> bytes:
    return _csv(["term", "estimate", "robust_se", "t_stat"], ((r.term, r.estimate, r.robust_se, r.t_stat) for r in rows))


def moic_csv(rows: Iterable[tuple[str, str, str, int, float]]) -> bytes:
    return _csv(["bundle_hash", "buy_ts", "sell_ts", "hold_weeks", "moic"], rows)


def series_csv(series: Mapping[WeekId, float]) -> bytes:
    return _csv(["iso_year", "iso_week", "value"], ((w.iso_year, w.iso_week, v) for w, v in sorted(series.items())))


def summary_csv(rows: Sequence[tuple[str, SummaryStats]]) -> bytes:
    return _csv(["variable", *SummaryStats.columns()], ((name, *s.row()) for name, s in rows))


def stamp(tx: Transaction) -> str:
    return tx.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def bundles_csv(txs: Sequence[Transaction]) -> bytes:
    return _csv(
        ["tx_id", "timestamp", "bundle_hash", "lot_size", "price_amount", "token", "sale_type", "mint_date", "age_days"],
        (
            (
                t.tx_id,
                stamp(t),
                t.bundle.digest(),
                t.lot_size,
                t.price_amount,
                t.settlement,
                t.sale_kind.value,
                t.mint_date.isoformat(),
                t.age_days,
            )
            for t in txs
        ),
    )


def rejected_csv(groups: Sequence[RejectedGroup]) -> bytes:
    return _csv(
        ["tx_id", "reason", "n_parcels", "parcels"],
        ((g.tx_id, g.reason, len(g.records), " ".join(f"{r.parcel.x}:{r.parcel.y}" for r in g.records)) for g in groups),
    )


def correlations_csv(rows: Iterable[tuple[str, str, int, float]]) -> bytes:
    return _csv(["series_a", "series_b", "n_weeks", "pearson"], rows)
