"""All-sales hedonic price index.

Log price is regressed on one dummy per observed ISO week (no intercept),
log lot size, log(age + 1), a primary-sale dummy and settlement-token
dummies. Exponentiated week coefficients, rebased to the first week, are the
index levels.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyAfterFilter, InvalidConfig, MissingTerm
from .ingest import WinsorBounds, winsorize
from .market import USD, DenominatedSale, WeekId, display_token, log_of
from .regress import DesignMatrix, RegressionResult, ols

LOT = "ln (lot size)"
AGE = "ln (LAND age)"
PRIMARY = "Primary sale (mint)"
OTHER = "OTHER"
WEEK_PREFIX = "week:"

# settlement dummies are laid out in this order, unknown symbols after
TOKEN_ORDER = ("SAND", "WETH", "DAI", "USDC")


def settled_label(token: str) -> str:
    return f"Settled in {display_token(token)}"


def week_label(week: WeekId) -> str:
    return WEEK_PREFIX + week.label()


@dataclass(frozen=True)
class HedonicSpec:
    denomination: str = USD
    omitted_settlement: str = "ETH"
    winsor: WinsorBounds = field(default_factory=WinsorBounds)
    age_offset: int = 1
    # tokens seen fewer times than this share a single OTHER dummy
    other_min_count: int = 2
    base_week: Optional[WeekId] = None
    hc_type: str = "HC0"


@dataclass(frozen=True)
class IndexPoint:
    week: WeekId
    level: float
    n_obs: int


@dataclass(frozen=True)
class PriceIndex:
    points: tuple[IndexPoint, ...]
    base_week: WeekId

    def __post_init__(self):
        weeks = [p.week for p in self.points]
        if any(a >= b for a, b in zip(weeks, weeks[1:])):
            raise ValueError("index weeks must be strictly increasing")
        if any(not p.level > 0 for p in self.points):
            raise ValueError("index levels must be positive")

    @property
    def weeks(self) -> list[WeekId]:
        return [p.week for p in self.points]

    @property
    def levels(self) -> np.ndarray:
        return np.array([p.level for p in self.points])

    def as_series(self) -> dict[WeekId, float]:
        return {p.week: p.level for p in self.points}

    def level(self, week: WeekId) -> float:
        for p in self.points:
            if p.week == week:
                return p.level
        raise KeyError(week)


def rebase(log_levels: dict[WeekId, float], counts: dict[WeekId, int], base: Optional[WeekId]) -> PriceIndex:
    """Exponentiate log levels relative to ``base`` (earliest week by default)."""
    weeks = sorted(log_levels)
    if base is None:
        base = weeks[0]
    elif base not in log_levels:
        raise InvalidConfig(f"base week {base.label()} has no index observation")
    ref = log_levels[base]
    points = tuple(
        IndexPoint(w, 1.0 if w == base else math.exp(log_levels[w] - ref), counts.get(w, 0)) for w in weeks
    )
    return PriceIndex(points, base)


def _settlement_columns(sales: Sequence[DenominatedSale], spec: HedonicSpec) -> tuple[list[str], dict[str, str]]:
    counts = Counter(s.source.settlement for s in sales)
    omitted = spec.omitted_settlement
    if omitted not in counts:
        raise InvalidConfig(f"omitted settlement {omitted} does not occur in the {spec.denomination} sample")
    column_of: dict[str, str] = {}
    kept: list[str] = []
    folded = False
    ordered = [t for t in TOKEN_ORDER if t in counts] + sorted(t for t in counts if t not in TOKEN_ORDER)
    for token in ordered:
        if token == omitted:
            continue
        if counts[token] < spec.other_min_count:
            column_of[token] = settled_label(OTHER)
            folded = True
        else:
            column_of[token] = settled_label(token)
            kept.append(settled_label(token))
    if folded:
        kept.append(settled_label(OTHER))
    return kept, column_of


def build_hedonic_design(sales: Sequence[DenominatedSale], spec: HedonicSpec) -> tuple[DesignMatrix, np.ndarray]:
    if not sales:
        raise EmptyAfterFilter(f"no priceable sales in {spec.denomination}")
    prices = winsorize([s.price for s in sales], spec.winsor)
    y = np.array([log_of(p) for p in prices])

    weeks = sorted({s.source.week for s in sales})
    week_col = {w: j for j, w in enumerate(weeks)}
    token_labels, column_of = _settlement_columns(sales, spec)
    has_primary = any(s.source.is_primary for s in sales)

    labels = [week_label(w) for w in weeks] + [LOT, AGE]
    if has_primary:
        labels.append(PRIMARY)
    labels += token_labels
    col = {lab: j for j, lab in enumerate(labels)}

    X = np.zeros((len(sales), len(labels)))
    for i, s in enumerate(sales):
        tx = s.source
        X[i, week_col[tx.week]] = 1.0
        X[i, col[LOT]] = math.log(tx.lot_size)
        X[i, col[AGE]] = math.log(tx.age_days + spec.age_offset)
        if tx.is_primary:
            X[i, col[PRIMARY]] = 1.0
        if tx.settlement in column_of:
            X[i, col[column_of[tx.settlement]]] = 1.0
    return DesignMatrix(X, tuple(labels)), y


def hedonic_index(sales: Sequence[DenominatedSale], spec: HedonicSpec) -> tuple[PriceIndex, RegressionResult]:
    X, y = build_hedonic_design(sales, spec)
    result = ols(X, y, hc_type=spec.hc_type)
    counts = Counter(s.source.week for s in sales)
    log_levels = {}
    for j, lab in enumerate(result.labels):
        if lab.startswith(WEEK_PREFIX):
            log_levels[WeekId.parse(lab[len(WEEK_PREFIX):])] = float(result.coefficients[j])
    return rebase(log_levels, counts, spec.base_week), result


@dataclass(frozen=True)
class PremiumRow:
    term: str
    estimate: float
    robust_se: float
    t_stat: float


def control_terms(result: RegressionResult) -> list[str]:
    return [lab for lab in result.labels if not lab.startswith(WEEK_PREFIX)]


def settlement_premia(result: RegressionResult, terms: Optional[Sequence[str]] = None) -> list[PremiumRow]:
    """Control and settlement coefficients with robust SEs and t statistics.

    Defaults to every non-week term in design order, which is the table row
    order. A zero standard error gives an infinite t carrying the estimate's sign.
    """
    if terms is None:
        terms = control_terms(result)
    rows = []
    for term in terms:
        if term not in result.labels:
            raise MissingTerm(f"term {term!r} not in the fitted design")
        est, se = result.coef(term), result.se(term)
        t = est / se if se > 0 else math.copysign(math.inf, est)
        rows.append(PremiumRow(term, est, se, t))
    return rows
