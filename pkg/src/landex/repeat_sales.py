"""Repeat-sales pairs, MOIC and the three-step Case-Shiller index.

Step 1 regresses each pair's log price change on +1/-1 week dummies (the
earliest observed week is the base and has no column). Step 2 regresses the
squared step-1 residuals on holding period. Step 3 re-runs step 1 by WLS with
weights 1 / (predicted squared residual).
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateVarianceFit, EmptyAfterFilter, MissingPrice, RankDeficient, ZeroPrice
from .hedonic import PriceIndex, rebase, week_label
from .ingest import convert
from .market import BundleKey, PriceTable, SaleKind, Transaction, WeekId
from .regress import DesignMatrix, RegressionResult, ols, wls

PRED_FLOOR = 1e-8
# log-price residuals this small are round-off from an exact first stage
EXACT_FIT_TOL = 1e-12


@dataclass(frozen=True)
class RepeatSalePair:
    bundle: BundleKey
    buy: Transaction
    sell: Transaction

    def __post_init__(self):
        if not self.buy.timestamp < self.sell.timestamp and not (
            self.buy.timestamp == self.sell.timestamp and self.buy.tx_id < self.sell.tx_id
        ):
            raise ValueError("buy leg must precede sell leg")
        if self.sell.sale_kind is not SaleKind.SECONDARY:
            raise ValueError("sell leg must be a secondary sale")
        if self.buy.bundle != self.bundle or self.sell.bundle != self.bundle:
            raise ValueError("both legs must share the bundle key")

    @property
    def hold_weeks(self) -> int:
        return self.sell.week.ordinal - self.buy.week.ordinal

    def dlog_price(self, denomination: str, table: PriceTable) -> float:
        return convert(self.sell, denomination, table).log_price - convert(self.buy, denomination, table).log_price


def _chrono(tx: Transaction):
    return (tx.timestamp, tx.tx_id)


def match_repeat_sales(txs: Sequence[Transaction]) -> list[RepeatSalePair]:
    """Pair each secondary sale with the previous transaction of the same bundle.

    Bundles are compared by exact coordinate set, so a parcel bought alone and
    later sold inside a larger bundle never pairs. Ties on timestamp are
    broken by tx_id.
    """
    by_key: dict[BundleKey, list[Transaction]] = defaultdict(list)
    for tx in txs:
        by_key[tx.bundle].append(tx)
    pairs = []
    for key in sorted(by_key):
        chain = sorted(by_key[key], key=_chrono)
        for prev, cur in zip(chain, chain[1:]):
            if cur.sale_kind is SaleKind.SECONDARY:
                pairs.append(RepeatSalePair(key, prev, cur))
    pairs.sort(key=lambda p: (_chrono(p.sell), p.buy.tx_id))
    return pairs


def moic(pair: RepeatSalePair, denomination: str, table: PriceTable) -> float:
    """Sell price over buy price, both in ``denomination``."""
    sell = convert(pair.sell, denomination, table).price
    buy = convert(pair.buy, denomination, table).price
    return float(sell / buy)


@dataclass
class RepeatSystem:
    """The step-1 regression problem plus what was filtered to get it."""

    design: DesignMatrix
    dlog: np.ndarray
    hold_weeks: np.ndarray
    weeks: list[WeekId]
    base_week: WeekId
    pairs: list[RepeatSalePair]
    week_counts: dict[WeekId, int]
    n_input: int
    n_unpriced: int = 0
    n_same_week: int = 0


def _components(edges: list[tuple[WeekId, WeekId]], nodes: list[WeekId]) -> list[list[WeekId]]:
    parent = {w: w for w in nodes}

    def find(w):
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[WeekId, list[WeekId]] = defaultdict(list)
    for w in nodes:
        groups[find(w)].append(w)
    return [sorted(g) for _, g in sorted(groups.items())]


def build_repeat_system(
    pairs: Sequence[RepeatSalePair], denomination: str, table: PriceTable, base_week: Optional[WeekId] = None
) -> RepeatSystem:
    kept, dlog = [], []
    n_unpriced = n_same = 0
    for p in pairs:
        try:
            d = p.dlog_price(denomination, table)
        except (MissingPrice, ZeroPrice):
            n_unpriced += 1
            continue
        if p.buy.week == p.sell.week:
            n_same += 1
            continue
        kept.append(p)
        dlog.append(d)
    if not kept:
        raise EmptyAfterFilter(
            f"no usable repeat-sale pairs in {denomination} "
            f"({len(pairs)} input, {n_unpriced} unpriced, {n_same} same-week)"
        )

    weeks = sorted({w for p in kept for w in (p.buy.week, p.sell.week)})
    comps = _components([(p.buy.week, p.sell.week) for p in kept], weeks)
    if len(comps) > 1:
        desc = "; ".join(f"[{c[0].label()} .. {c[-1].label()}] ({len(c)} weeks)" for c in comps)
        raise RankDeficient(
            f"repeat-sale week graph is disconnected into {len(comps)} components: {desc}",
            [week_label(c[0]) for c in comps],
        )
    if base_week is None:
        base_week = weeks[0]
    elif base_week not in weeks:
        raise EmptyAfterFilter(f"base week {base_week.label()} has no repeat-sale observation")
    free = [w for w in weeks if w != base_week]
    col = {w: j for j, w in enumerate(free)}
    X = np.zeros((len(kept), len(free)))
    for i, p in enumerate(kept):
        if p.sell.week in col:
            X[i, col[p.sell.week]] = 1.0
        if p.buy.week in col:
            X[i, col[p.buy.week]] = -1.0
    counts = Counter(w for p in kept for w in (p.buy.week, p.sell.week))
    return RepeatSystem(
        DesignMatrix(X, tuple(week_label(w) for w in free)),
        np.array(dlog),
        np.array([p.hold_weeks for p in kept], dtype=float),
        weeks,
        base_week,
        kept,
        dict(counts),
        len(pairs),
        n_unpriced,
        n_same,
    )


def bmn_stage(
    pairs: Sequence[RepeatSalePair], denomination: str, table: PriceTable, base_week: Optional[WeekId] = None
) -> RegressionResult:
    """Unweighted first-stage repeat-sales regression."""
    system = build_repeat_system(pairs, denomination, table, base_week)
    return ols(system.design, system.dlog)


@dataclass(frozen=True)
class VarianceFit:
    predictions: np.ndarray
    intercept: float
    slope: float
    quadratic: Optional[float] = None
    constant_fit: bool = False


def variance_stage(residuals, hold_weeks, quadratic: bool = False) -> VarianceFit:
    """Fit squared residuals on holding period and return floored predictions.

    If every pair has the same holding period the fit collapses to the mean
    squared residual. A perfect first stage (every |residual| at most
``EXACT_FIT_TOL``) raises
    :class:`DegenerateVarianceFit`; callers then fall back to uniform weights.
    """
    e2 = np.asarray(residuals, dtype=float) ** 2
    h = np.asarray(hold_weeks, dtype=float)
    if e2.shape != h.shape:
        raise ValueError("residuals and holding periods differ in length")
    if not np.any(e2 > EXACT_FIT_TOL**2):
        raise DegenerateVarianceFit("first-stage residuals are all zero")

    distinct = np.unique(h).size
    if distinct < 2:
        fitted = np.full_like(e2, e2.mean())
        intercept, slope, quad, constant = float(e2.mean()), 0.0, None, True
    else:
        cols = [np.ones_like(h), h]
        labels = ["const", "hold_weeks"]
        if quadratic and distinct >= 3:
            cols.append(h * h)
            labels.append("hold_weeks^2")
        res = ols(DesignMatrix(np.column_stack(cols), tuple(labels)), e2)
        fitted = e2 - res.residuals
        intercept, slope = float(res.coefficients[0]), float(res.coefficients[1])
        quad = float(res.coefficients[2]) if len(labels) == 3 else None
        constant = False

    positive = fitted[fitted > 0]
    floor = max(PRED_FLOOR, positive.min() * 1e-3) if positive.size else PRED_FLOOR
    return VarianceFit(np.maximum(fitted, floor), intercept, slope, quad, constant)


@dataclass
class CaseShillerDiagnostics:
    denomination: str
    n_pairs_input: int
    n_unpriced: int
    n_same_week: int
    n_used: int
    n_weeks: int
    base_week: WeekId
    step2_intercept: float = float("nan")
    step2_slope: float = float("nan")
    step2_quadratic: Optional[float] = None
    uniform_weights: bool = False
    weight_min: float = 1.0
    weight_max: float = 1.0
    step1: Optional[RegressionResult] = field(default=None, repr=False)
    step3: Optional[RegressionResult] = field(default=None, repr=False)

    def text(self) -> str:
        lines = [
            f"Case-Shiller repeat-sales index ({self.denomination})",
            f"  pairs in:            {self.n_pairs_input}",
            f"  dropped, unpriced:   {self.n_unpriced}",
            f"  dropped, same week:  {self.n_same_week}",
            f"  pairs used:          {self.n_used}",
            f"  weeks indexed:       {self.n_weeks} (base {self.base_week.label()})",
        ]
        if self.uniform_weights:
            lines.append("  step 2: perfect first-stage fit, uniform weights")
        else:
            lines.append(f"  step 2: e^2 = {self.step2_intercept:.6g} + {self.step2_slope:.6g} * hold_weeks")
            if self.step2_quadratic is not None:
                lines[-1] += f" + {self.step2_quadratic:.6g} * hold_weeks^2"
        lines.append(f"  step 3 weight range: [{self.weight_min:.6g}, {self.weight_max:.6g}]")
        return "\n".join(lines) + "\n"


def case_shiller_index(
    pairs: Sequence[RepeatSalePair],
    denomination: str,
    table: PriceTable,
    base_week: Optional[WeekId] = None,
    quadratic: bool = False,
) -> tuple[PriceIndex, CaseShillerDiagnostics]:
    system = build_repeat_system(pairs, denomination, table, base_week)
    step1 = ols(system.design, system.dlog)
    diag = CaseShillerDiagnostics(
        denomination,
        system.n_input,
        system.n_unpriced,
        system.n_same_week,
        len(system.pairs),
        len(system.weeks),
        system.base_week,
        step1=step1,
    )
    try:
        vfit = variance_stage(step1.residuals, system.hold_weeks, quadratic=quadratic)
        weights = 1.0 / vfit.predictions
        diag.step2_intercept, diag.step2_slope, diag.step2_quadratic = vfit.intercept, vfit.slope, vfit.quadratic
    except DegenerateVarianceFit:
        weights = np.ones(len(system.pairs))
        diag.uniform_weights = True
    diag.weight_min, diag.weight_max = float(weights.min()), float(weights.max())
    step3 = wls(system.design, system.dlog, weights)
    diag.step3 = step3

    log_levels = {system.base_week: 0.0}
    for w, coef in zip([w for w in system.weeks if w != system.base_week], step3.coefficients):
        log_levels[w] = float(coef)
    return rebase(log_levels, system.week_counts, system.base_week), diag
