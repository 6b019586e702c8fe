"""End-to-end orchestration behind the CLI subcommands.

Each ``run_*`` function returns a :class:`Run` holding the files to write and
the log lines to print; nothing touches the filesystem until the caller
writes the whole batch.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar

from . import outputs
from .errors import DataError, EmptyAfterFilter
from .hedonic import HedonicSpec, PriceIndex, hedonic_index, settlement_premia
from .ingest import (
    RawSaleRecord,
    RejectedGroup,
    WinsorBounds,
    denominate,
    parse_price_table,
    parse_transactions,
    aggregate_to_bundles,
    winsorize,
)
from .market import USD, PriceTable, SaleKind, Transaction, WeekId, display_token
from .regress import RegressionResult
from .repeat_sales import CaseShillerDiagnostics, RepeatSalePair, case_shiller_index, match_repeat_sales, moic
from .stats import SummaryStats, pearson, relative_price_index, sand_settlement_share, summarize, weekly_mean_price

T = TypeVar("T")

DEFAULT_DENOMS = (USD, "ETH", "SAND")


@dataclass
class RunConfig:
    tx_path: Optional[Path] = None
    prices_path: Optional[Path] = None
    denominations: tuple[str, ...] = DEFAULT_DENOMS
    winsor: WinsorBounds = field(default_factory=WinsorBounds)
    out_dir: Path = Path("out")
    row_price_mode: str = "per-parcel"
    strict_tokens: bool = True
    base_week: Optional[WeekId] = None
    hc_type: str = "HC0"
    quadratic_step2: bool = False

    def __post_init__(self):
        if not self.denominations:
            raise ValueError("at least one denomination is required")


@dataclass
class Run:
    files: dict[str, bytes] = field(default_factory=dict)
    log: list[str] = field(default_factory=list)


@dataclass
class Loaded:
    records: list[RawSaleRecord]
    txs: list[Transaction]
    rejected: list[RejectedGroup]
    table: Optional[PriceTable]


def load(cfg: RunConfig, run: Run, need_prices: bool = True) -> Loaded:
    records = parse_transactions(Path(cfg.tx_path).read_bytes(), strict=cfg.strict_tokens)
    txs, rejected = aggregate_to_bundles(records, row_price_mode=cfg.row_price_mode)
    table = None
    if cfg.prices_path is not None:
        table = parse_price_table(Path(cfg.prices_path).read_bytes())
    elif need_prices:
        raise DataError("a price table is required")
    run.log.append(
        f"parsed: {len(records)} parcel rows -> {len(txs) + len(rejected)} transactions; "
        f"contiguous: {len(txs)} bundles ({len(rejected)} non-contiguous rejected)"
    )
    return Loaded(records, txs, rejected, table)


def _per_denom(cfg: RunConfig, fn: Callable[[str], T]) -> list[T]:
    # denominations share nothing mutable; results come back in input order
    if len(cfg.denominations) == 1:
        return [fn(cfg.denominations[0])]
    with ThreadPoolExecutor(max_workers=len(cfg.denominations)) as pool:
        return list(pool.map(fn, cfg.denominations))


@dataclass
class HedonicOutcome:
    denomination: str
    index: PriceIndex
    result: RegressionResult
    n_priceable: int
    n_unpriced: int


def hedonic_all(cfg: RunConfig, data: Loaded, run: Run) -> list[HedonicOutcome]:
    def one(denom: str) -> HedonicOutcome:
        d = denominate(data.txs, denom, data.table)
        spec = HedonicSpec(denomination=denom, winsor=cfg.winsor, base_week=cfg.base_week, hc_type=cfg.hc_type)
        index, result = hedonic_index(d.sales, spec)
        return HedonicOutcome(denom, index, result, len(d.sales), d.missing_price + d.zero_price)

    outcomes = _per_denom(cfg, one)
    for o in outcomes:
        run.files[f"index_{o.denomination}.csv"] = outputs.index_csv(o.index)
        run.files[f"hedonic_coefs_{o.denomination}.csv"] = outputs.coefs_csv(settlement_premia(o.result))
        run.log.append(
            f"hedonic {o.denomination}: priceable {o.n_priceable} ({o.n_unpriced} without a price), "
            f"regressed {o.result.n_obs}, weeks {len(o.index.points)}, adj R2 {o.result.adj_r_squared:.4f}"
        )
    return outcomes


@dataclass
class RepeatOutcome:
    denomination: str
    index: PriceIndex
    diagnostics: CaseShillerDiagnostics
    moic: list[float]


def repeat_all(cfg: RunConfig, data: Loaded, run: Run) -> tuple[list[RepeatSalePair], list[RepeatOutcome]]:
    pairs = match_repeat_sales(data.txs)
    run.log.append(f"repeat-sale pairs: {len(pairs)}")

    def one(denom: str) -> RepeatOutcome:
        index, diag = case_shiller_index(pairs, denom, data.table, cfg.base_week, quadratic=cfg.quadratic_step2)
        rows, values = [], []
        for p in pairs:
            try:
                m = moic(p, denom, data.table)
            except DataError:
                continue
            values.append(m)
            rows.append((p.bundle.digest(), outputs.stamp(p.buy), outputs.stamp(p.sell), p.hold_weeks, m))
        run_files = {
            f"rs_index_{denom}.csv": outputs.index_csv(index),
            f"moic_{denom}.csv": outputs.moic_csv(rows),
            f"rs_diagnostics_{denom}.txt": diag.text().encode("utf-8"),
        }
        return RepeatOutcome(denom, index, diag, values), run_files

    results = _per_denom(cfg, one)
    outcomes = []
    for outcome, files in results:
        run.files.update(files)
        d = outcome.diagnostics
        run.log.append(
            f"repeat {outcome.denomination}: priceable pairs {d.n_pairs_input - d.n_unpriced}, "
            f"same-week dropped {d.n_same_week}, regressed {d.n_used}, weeks {d.n_weeks}"
        )
        run.log.append(d.text().rstrip())
        outcomes.append(outcome)
    return pairs, outcomes


def _summaries(rows: Sequence[tuple[str, Sequence[float]]], run: Run, what: str) -> list[tuple[str, SummaryStats]]:
    out = []
    for name, values in rows:
        try:
            out.append((name, summarize(values)))
        except DataError as e:
            run.log.append(f"{what}: skipped {name} ({e})")
    return out


def _safe_pearson(a, b) -> tuple[int, float]:
    n = len(set(a) & set(b))
    try:
        return n, pearson(a, b)
    except DataError:
        return n, math.nan


@dataclass
class StatsOutcome:
    all_sales: list[tuple[str, SummaryStats]]
    repeat_sales: list[tuple[str, SummaryStats]]
    moic: list[tuple[str, SummaryStats]]
    series: dict[str, dict[WeekId, float]]
    correlations: list[tuple[str, str, int, float]]
    denomination_counts: dict[tuple[str, SaleKind], int]


def _usd_summary_rows(txs: Sequence[Transaction], cfg: RunConfig, table: PriceTable):
    d = denominate(txs, USD, table)
    prices = [float(p) for p in winsorize([s.price for s in d.sales], cfg.winsor)] if d.sales else []
    return [
        ("usd_price", prices),
        ("lot_size", [float(s.source.lot_size) for s in d.sales]),
        ("age_days", [float(s.source.age_days) for s in d.sales]),
    ]


def stats_all(
    cfg: RunConfig,
    data: Loaded,
    run: Run,
    pairs: Optional[list[RepeatSalePair]] = None,
    hedonic: Sequence[HedonicOutcome] = (),
    repeat: Sequence[RepeatOutcome] = (),
) -> StatsOutcome:
    table = data.table
    if pairs is None:
        pairs = match_repeat_sales(data.txs)
    sells = {p.sell.tx_id: p.sell for p in pairs}
    all_rows = _summaries(_usd_summary_rows(data.txs, cfg, table), run, "all-sales summary")
    rep_rows = _summaries(_usd_summary_rows(list(sells.values()), cfg, table), run, "repeat-sales summary")

    moic_values = {o.denomination: o.moic for o in repeat}
    for denom in cfg.denominations:
        if denom not in moic_values:
            vals = []
            for p in pairs:
                try:
                    vals.append(moic(p, denom, table))
                except DataError:
                    pass
            moic_values[denom] = vals
    moic_rows = _summaries([(f"moic_{d}", moic_values[d]) for d in cfg.denominations], run, "MOIC summary")

    series: dict[str, dict[WeekId, float]] = {"sand_share": sand_settlement_share(data.txs)}
    tokens = table.tokens()
    for token in ("ETH", "SAND"):
        if token in tokens:
            series[f"price_{token}"] = weekly_mean_price(table, token)
    if "ETH" in tokens and "SAND" in tokens:
        try:
            series["relative_ETH_SAND"] = relative_price_index("ETH", "SAND", table)
        except DataError as e:
            run.log.append(f"relative price index skipped ({e})")

    corrs = []
    if "price_ETH" in series and "price_SAND" in series:
        corrs.append(("price_ETH", "price_SAND", *_safe_pearson(series["price_ETH"], series["price_SAND"])))
    if "relative_ETH_SAND" in series:
        corrs.append(("sand_share", "relative_ETH_SAND", *_safe_pearson(series["sand_share"], series["relative_ETH_SAND"])))
    h_by = {o.denomination: o for o in hedonic}
    for o in hedonic:
        if "price_SAND" in series:
            corrs.append((f"index_{o.denomination}", "price_SAND", *_safe_pearson(o.index.as_series(), series["price_SAND"])))
    for o in repeat:
        if o.denomination in h_by:
            corrs.append(
                (
                    f"rs_index_{o.denomination}",
                    f"index_{o.denomination}",
                    *_safe_pearson(o.index.as_series(), h_by[o.denomination].index.as_series()),
                )
            )

    counts = Counter((t.settlement, t.sale_kind) for t in data.txs)

    run.files["summary_all_sales.csv"] = outputs.summary_csv(all_rows)
    run.files["summary_repeat_sales.csv"] = outputs.summary_csv(rep_rows)
    run.files["summary_moic.csv"] = outputs.summary_csv(moic_rows)
    for name, s in series.items():
        run.files[f"series_{name}.csv"] = outputs.series_csv(s)
    run.files["correlations.csv"] = outputs.correlations_csv(corrs)
    run.log.append(
        f"stats: {len(data.txs)} bundle sales summarised, {len(sells)} repeat sales, "
        f"{len(series)} weekly series, {len(corrs)} correlations"
    )
    return StatsOutcome(all_rows, rep_rows, moic_rows, series, corrs, dict(counts))


def run_ingest(cfg: RunConfig) -> Run:
    run = Run()
    data = load(cfg, run, need_prices=False)
    run.files["bundles.csv"] = outputs.bundles_csv(data.txs)
    run.files["rejected.csv"] = outputs.rejected_csv(data.rejected)
    if data.table is not None:
        for denom in cfg.denominations:
            d = denominate(data.txs, denom, data.table)
            run.log.append(f"priceable in {denom}: {len(d.sales)} ({d.missing_price} missing price, {d.zero_price} zero price)")
    return run


def run_hedonic(cfg: RunConfig) -> Run:
    run = Run()
    hedonic_all(cfg, load(cfg, run), run)
    return run


def run_repeat(cfg: RunConfig) -> Run:
    run = Run()
    repeat_all(cfg, load(cfg, run), run)
    return run


def run_stats(cfg: RunConfig) -> Run:
    run = Run()
    stats_all(cfg, load(cfg, run), run)
    return run


def run_report(cfg: RunConfig) -> Run:
    run = Run()
    data = load(cfg, run)
    run.files["bundles.csv"] = outputs.bundles_csv(data.txs)
    run.files["rejected.csv"] = outputs.rejected_csv(data.rejected)
    hed = hedonic_all(cfg, data, run)
    try:
        pairs, rep = repeat_all(cfg, data, run)
    except EmptyAfterFilter as e:
        run.log.append(f"repeat-sales index skipped ({e})")
        pairs, rep = match_repeat_sales(data.txs), []
    st = stats_all(cfg, data, run, pairs, hed, rep)
    run.files["report.md"] = render_report(cfg, data, hed, rep, st).encode("utf-8")
    return run


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return lines


def _stat_rows(rows: Sequence[tuple[str, SummaryStats]]) -> list[list[str]]:
    return [[name, *(outputs.fmt(round(v, 4) if isinstance(v, float) else v) for v in s.row())] for name, s in rows]


def render_report(
    cfg: RunConfig,
    data: Loaded,
    hedonic: Sequence[HedonicOutcome],
    repeat: Sequence[RepeatOutcome],
    st: StatsOutcome,
) -> str:
    out = ["# LAND price report", ""]
    out += [
        "## Sample",
        "",
        f"- parcel rows parsed: {len(data.records)}",
        f"- bundle transactions kept (contiguous): {len(data.txs)}",
        f"- non-contiguous transactions rejected: {len(data.rejected)}",
        f"- winsorization quantiles: {cfg.winsor.low_q} / {cfg.winsor.high_q}",
        "",
        "## Settlement token by sale type",
        "",
    ]
    tokens = sorted({t for t, _ in st.denomination_counts})
    prim = sum(v for (t, k), v in st.denomination_counts.items() if k is SaleKind.PRIMARY)
    sec = sum(v for (t, k), v in st.denomination_counts.items() if k is SaleKind.SECONDARY)
    rows = []
    for t in tokens:
        p = st.denomination_counts.get((t, SaleKind.PRIMARY), 0)
        s = st.denomination_counts.get((t, SaleKind.SECONDARY), 0)
        rows.append(
            [display_token(t), str(p), _pct(p, prim), str(s), _pct(s, sec), str(p + s), _pct(p + s, prim + sec)]
        )
    rows.append(["Total", str(prim), _pct(prim, prim), str(sec), _pct(sec, sec), str(prim + sec), _pct(1, 1)])
    out += _md_table(["Token", "Primary", "%", "Secondary", "%", "Total", "%"], rows)
    header = ["variable", *SummaryStats.columns()]
    out += ["", "## Characteristics at sale (USD)", "", "All transactions:", ""]
    out += _md_table(header, _stat_rows(st.all_sales))
    out += ["", "Repeat sales only:", ""]
    out += _md_table(header, _stat_rows(st.repeat_sales))

    out += ["", "## Hedonic regressions", ""]
    if hedonic:
        terms = []
        for o in hedonic:
            for r in settlement_premia(o.result):
                if r.term not in terms:
                    terms.append(r.term)
        rows = []
        for term in terms:
            row = [term]
            for o in hedonic:
                if term in o.result.labels:
                    row.append(f"{o.result.coef(term):.3f} ({o.result.se(term):.3f})")
                else:
                    row.append("")
            rows.append(row)
        rows.append(["Week indicators", *("included" for _ in hedonic)])
        rows.append(["Observations", *(str(o.result.n_obs) for o in hedonic)])
        rows.append(["Adj R-squared", *(f"{o.result.adj_r_squared:.3f}" for o in hedonic)])
        out += _md_table(["Term", *(o.denomination for o in hedonic)], rows)
        out += ["", "Robust (" + cfg.hc_type + ") standard errors in parentheses.", ""]
        out += ["## All-sales indices", ""]
        rows = [
            [o.denomination, o.index.weeks[0].label(), o.index.weeks[-1].label(), str(len(o.index.points)),
             f"{max(o.index.levels):.4g}", f"{o.index.levels[-1]:.4g}"]
            for o in hedonic
        ]
        out += _md_table(["Denomination", "Base week", "Last week", "Weeks", "Max level", "Last level"], rows)

    out += ["", "## Repeat sales", ""]
    out += _md_table(header, _stat_rows(st.moic))
    if repeat:
        out += [""]
        rows = [
            [o.denomination, o.index.base_week.label(), str(len(o.index.points)), f"{max(o.index.levels):.4g}",
             f"{o.index.levels[-1]:.4g}", str(o.diagnostics.n_used)]
            for o in repeat
        ]
        out += _md_table(["Denomination", "Base week", "Weeks", "Max level", "Last level", "Pairs used"], rows)
        for o in repeat:
            out += ["", "```", o.diagnostics.text().rstrip(), "```"]

    out += ["", "## Correlations", ""]
    out += _md_table(
        ["Series A", "Series B", "Weeks", "Pearson"],
        [[a, b, str(n), "n/a" if math.isnan(r) else f"{r:.4f}"] for a, b, n, r in st.correlations],
    )
    return "\n".join(out) + "\n"


def _pct(a: int, b: int) -> str:
    return f"{100.0 * a / b:.1f}%" if b else "n/a"
