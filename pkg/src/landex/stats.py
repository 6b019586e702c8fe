"""Descriptive statistics and weekly series.

Weekly series are plain ``dict[WeekId, float]`` in chronological order.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import astuple, dataclass, fields
from typing import Mapping, Sequence

from .errors import ConstantSeries, MissingPrice, NoOverlap, TooFewObservations
from .ingest import quantile
from .market import PriceTable, SaleKind, Transaction, WeekId, week_of

WeeklySeries = dict[WeekId, float]


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float
    p5: float
    p50: float
    p95: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple:
        return astuple(self)


def summarize(values: Sequence[float]) -> SummaryStats:
    """Moments and percentiles in the layout of a summary-statistics table.

    ``std_dev`` uses n - 1. Skewness and kurtosis are ratios of population
    central moments; kurtosis is raw, so a normal sample sits near 3.
    Percentiles use linear interpolation at (n - 1) * q.
    """
    xs = [float(v) for v in values]
    n = len(xs)
    if n < 2:
        raise TooFewObservations(f"need at least 2 values, got {n}")
    mean = math.fsum(xs) / n
    dev = [x - mean for x in xs]
    m2 = math.fsum(d * d for d in dev) / n
    m3 = math.fsum(d ** 3 for d in dev) / n
    m4 = math.fsum(d ** 4 for d in dev) / n
    std = math.sqrt(m2 * n / (n - 1))
    if m2 > 0:
        skew = m3 / m2 ** 1.5
        kurt = m4 / (m2 * m2)
    else:
        skew = kurt = float("nan")
    ordered = sorted(xs)
    return SummaryStats(
        n, mean, std, skew, kurt, quantile(ordered, 0.05), quantile(ordered, 0.5), quantile(ordered, 0.95)
    )


def pearson(a: Mapping[WeekId, float], b: Mapping[WeekId, float]) -> float:
    """Sample correlation of two weekly series over their common weeks."""
    common = sorted(set(a) & set(b))
    if len(common) < 2:
        raise NoOverlap(f"series share {len(common)} weeks, need at least 2")
    xs = [float(a[w]) for w in common]
    ys = [float(b[w]) for w in common]
    mx, my = math.fsum(xs) / len(xs), math.fsum(ys) / len(ys)
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise ConstantSeries("correlation undefined for a constant series")
    r = math.fsum(p * q for p, q in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def weekly_mean_price(table: PriceTable, token: str) -> WeeklySeries:
    buckets: dict[WeekId, list[float]] = defaultdict(list)
    for day, px in table.daily(token):
        y, w, _ = day.isocalendar()
        buckets[WeekId(y, w)].append(float(px))
    return {w: math.fsum(v) / len(v) for w, v in sorted(buckets.items())}


def relative_price_index(numerator: str, denominator: str, table: PriceTable, base: WeekId | None = None) -> WeeklySeries:
    """Weekly mean USD price of ``denominator`` over that of ``numerator``, 1 at ``base``.

    ``relative_price_index("ETH", "SAND", ...)`` rises when SAND gains on ETH.
    Only weeks where both tokens have prices appear. ``base`` defaults to the
    first such week.
    """
    num = weekly_mean_price(table, numerator)
    den = weekly_mean_price(table, denominator)
    common = sorted(set(num) & set(den))
    if base is None:
        if not common:
            raise MissingPrice(f"{numerator} and {denominator} are never priced in the same week")
        base = common[0]
    if base not in num or base not in den:
        raise MissingPrice(f"base week {base.label()} lacks a {numerator} or {denominator} price")
    ref = den[base] / num[base]
    return {w: (den[w] / num[w]) / ref for w in common}


def sand_settlement_share(txs: Sequence[Transaction], token: str = "SAND") -> WeeklySeries:
    """Share of each week's secondary sales settled in ``token``."""
    total: dict[WeekId, int] = defaultdict(int)
    hits: dict[WeekId, int] = defaultdict(int)
    for tx in txs:
        if tx.sale_kind is not SaleKind.SECONDARY:
            continue
        w = week_of(tx.timestamp)
        total[w] += 1
        if tx.settlement == token:
            hits[w] += 1
    return {w: hits[w] / total[w] for w in sorted(total)}
