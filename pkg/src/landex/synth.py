"""Seeded synthetic land market with known ground truth.

Random numbers come from numpy's Philox (counter-based, 64-bit) bit
generator seeded with ``SynthConfig.seed``, so a config always yields the
same bytes.

Generative model, per sale i of bundle b in week t::

    log usd_price = delta_usd[t] + lot_elasticity * ln(lot) + age_coef * ln(age + 1)
                    + primary_effect * primary + premium[settlement] + eps

    eps = u_b + eta,   eta ~ N(0, noise_base_var)
    u_b = u_b(previous trade) + N(0, noise_slope * weeks since that trade),  u_b = 0 at mint

Token prices are constant within each ISO week, so a sale's log price in
token D is exactly ``delta_usd[t] - ln usd(D, t) + controls + eps``; the
weekly truth for denomination D is ``delta_usd[t] - ln usd(D, t)``.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field, fields
from decimal import ROUND_DOWN, Decimal
from typing import Any, Mapping

import numpy as np

from .errors import InvalidConfig
from .hedonic import AGE, LOT, PRIMARY, settled_label
from .market import USD, WeekId

BLOCK = 3
BLOCKS_PER_ROW = 408 // BLOCK
MAX_BUNDLES = BLOCKS_PER_ROW * BLOCKS_PER_ROW
PEGGED = ("DAI", "USDC")


def _default_premia() -> dict[str, float]:
    return {"SAND": 0.04, "WETH": -0.30, "DAI": -0.10, "USDC": -0.25}


def _default_paths() -> dict[str, tuple[float, float]]:
    # (weekly log drift, weekly log volatility) of the USD price
    return {"ETH": (0.01, 0.08), "SAND": (0.03, 0.15)}


def _default_mix() -> dict[str, float]:
    return {"ETH": 0.74, "WETH": 0.16, "SAND": 0.09, "USDC": 0.01}


def _default_shapes() -> dict[str, float]:
    return {"1x1": 0.8, "1x2": 0.08, "2x2": 0.06, "3x3": 0.06}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_weeks: int = 52
    n_bundles: int = 1000
    # Poisson mean of sales per week
    sales_per_week: float = 100.0
    start_monday: dt.date = dt.date(2020, 8, 10)
    index_start: float = math.log(1000.0)
    index_drift: float = 0.02
    index_vol: float = 0.05
    lot_elasticity: float = 1.0
    age_coef: float = -0.02
    primary_effect: float = -0.34
    settlement_premia: Mapping[str, float] = field(default_factory=_default_premia)
    noise_base_var: float = 0.04
    noise_slope: float = 0.0
    token_paths: Mapping[str, tuple[float, float]] = field(default_factory=_default_paths)
    token_start: Mapping[str, float] = field(default_factory=lambda: {"ETH": 400.0, "SAND": 0.05})
    settlement_mix: Mapping[str, float] = field(default_factory=_default_mix)
    # week index from which SAND is priced; earlier mints settle in DAI
    sand_start_week: int = 0
    bundle_shapes: Mapping[str, float] = field(default_factory=_default_shapes)

    def __post_init__(self):
        if self.n_weeks < 2:
            raise InvalidConfig("n_weeks must be at least 2")
        if not 1 <= self.n_bundles <= MAX_BUNDLES:
            raise InvalidConfig(f"n_bundles must be in 1..{MAX_BUNDLES}")
        if self.sales_per_week <= 0:
            raise InvalidConfig("sales_per_week must be positive")
        if self.start_monday.weekday() != 0:
            raise InvalidConfig("start_monday must be a Monday")
        if min(self.noise_base_var, self.noise_slope, self.index_vol) < 0:
            raise InvalidConfig("variances must be non-negative")
        if any(v < 0 for _, v in self.token_paths.values()):
            raise InvalidConfig("token volatilities must be non-negative")
        if not 0 <= self.sand_start_week < self.n_weeks:
            raise InvalidConfig("sand_start_week outside the simulated span")
        for name, probs in (("settlement_mix", self.settlement_mix), ("bundle_shapes", self.bundle_shapes)):
            if not probs or any(p < 0 for p in probs.values()) or sum(probs.values()) <= 0:
                raise InvalidConfig(f"{name} needs non-negative weights with positive sum")
        for shape in self.bundle_shapes:
            w, h = _parse_shape(shape)
            if not (1 <= w <= BLOCK and 1 <= h <= BLOCK):
                raise InvalidConfig(f"bundle shape {shape} exceeds {BLOCK}x{BLOCK}")
        unknown = set(self.settlement_mix) - {"ETH", "WETH", "SAND", *PEGGED}
        if unknown:
            raise InvalidConfig(f"no price path for settlement tokens {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], **overrides) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        extra = set(merged) - known
        if extra:
            raise InvalidConfig(f"unknown synth config keys {sorted(extra)}")
        kwargs = dict(merged)
        if isinstance(kwargs.get("start_monday"), str):
            kwargs["start_monday"] = dt.date.fromisoformat(kwargs["start_monday"])
        if "token_paths" in kwargs:
            kwargs["token_paths"] = {k.upper(): tuple(v) for k, v in kwargs["token_paths"].items()}
        for key in ("settlement_premia", "token_start", "settlement_mix"):
            if key in kwargs:
                kwargs[key] = {k.upper(): float(v) for k, v in kwargs[key].items()}
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise InvalidConfig(str(e)) from None


def _parse_shape(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise InvalidConfig(f"bundle shape {text!r} is not WxH") from None


@dataclass(frozen=True)
class GroundTruth:
    # per denomination: week -> true log level (not rebased)
    log_delta: Mapping[str, Mapping[WeekId, float]]
    beta: Mapping[str, float]

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iso_year", "iso_week", "denom", "true_log_delta"])
        for denom in sorted(self.log_delta):
            for week, v in sorted(self.log_delta[denom].items()):
                w.writerow([week.iso_year, week.iso_week, denom, repr(v)])
        return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class SynthMarket:
    transactions_csv: bytes
    prices_csv: bytes
    truth: GroundTruth


def _sig(x: float) -> Decimal:
    return Decimal(f"{x:.12g}")


def _plain(d: Decimal) -> str:
    return format(d, "f")


def _split(amount: Decimal, parts: int) -> list[Decimal]:
    if parts == 1:
        return [amount]
    exp = min(amount.as_tuple().exponent, -2)
    per = (amount / parts).quantize(Decimal(1).scaleb(exp), rounding=ROUND_DOWN)
    return [per] * (parts - 1) + [amount - per * (parts - 1)]


class _Categorical:
    def __init__(self, probs: Mapping[str, float]):
        self.keys = sorted(probs)
        p = np.array([probs[k] for k in self.keys], dtype=float)
        self.cdf = np.cumsum(p / p.sum())

    def draw(self, rng: np.random.Generator) -> str:
        i = int(np.searchsorted(self.cdf, rng.random(), side="right"))
        return self.keys[min(i, len(self.keys) - 1)]


def generate_market(config: SynthConfig) -> SynthMarket:
    rng = np.random.Generator(np.random.Philox(config.seed))
    n_weeks = config.n_weeks
    weeks = [WeekId(*(config.start_monday + dt.timedelta(weeks=t)).isocalendar()[:2]) for t in range(n_weeks)]

    steps = config.index_drift + config.index_vol * rng.standard_normal(n_weeks - 1)
    delta_usd = config.index_start + np.concatenate([[0.0], np.cumsum(steps)])

    # weekly token prices, rounded once so the files and the truth agree exactly
    usd_px: dict[str, list[Decimal | None]] = {}
    for token in sorted(config.token_paths):
        drift, vol = config.token_paths[token]
        start = config.token_start.get(token, 1.0)
        path = math.log(start) + np.concatenate([[0.0], np.cumsum(drift + vol * rng.standard_normal(n_weeks - 1))])
        usd_px[token] = [_sig(math.exp(v)) for v in path]
    if "ETH" in usd_px:
        usd_px["WETH"] = list(usd_px["ETH"])
    for token in PEGGED:
        usd_px[token] = [Decimal(1)] * n_weeks
    if "SAND" in usd_px:
        usd_px["SAND"] = [None if t < config.sand_start_week else p for t, p in enumerate(usd_px["SAND"])]

    shape_dist = _Categorical(config.bundle_shapes)
    bundle_shape = [_parse_shape(shape_dist.draw(rng)) for _ in range(config.n_bundles)]
    token_dist = _Categorical(config.settlement_mix)

    minted: dict[int, dt.date] = {}
    last_week: dict[int, int] = {}
    walk: dict[int, float] = {}
    premia = {k: v for k, v in config.settlement_premia.items()}
    base_sd = math.sqrt(config.noise_base_var)

    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["tx_id", "timestamp", "parcel_x", "parcel_y", "price_amount", "token", "sale_type", "mint_date"])
    tx_no = 0
    for t in range(n_weeks):
        n_sales = int(rng.poisson(config.sales_per_week))
        offsets = np.sort(rng.integers(0, 7 * 86400, size=n_sales))
        picks = rng.integers(0, config.n_bundles, size=n_sales)
        monday = dt.datetime.combine(config.start_monday + dt.timedelta(weeks=t), dt.time(), dt.timezone.utc)
        sand_live = usd_px.get("SAND", [None] * n_weeks)[t] is not None
        for off, b in zip(offsets.tolist(), picks.tolist()):
            ts = monday + dt.timedelta(seconds=off)
            primary = b not in minted
            if primary:
                minted[b] = ts.date()
                token = "SAND" if sand_live else "DAI"
                walk[b] = 0.0
            else:
                token = token_dist.draw(rng)
                if token == "SAND" and not sand_live:
                    token = "ETH"
                hold = t - last_week[b]
                walk[b] += math.sqrt(config.noise_slope * hold) * float(rng.standard_normal()) if hold > 0 else 0.0
            last_week[b] = t
            eps = walk[b] + base_sd * float(rng.standard_normal())
            w, h = bundle_shape[b]
            lot = w * h
            age = (ts.date() - minted[b]).days
            log_usd = (
                delta_usd[t]
                + config.lot_elasticity * math.log(lot)
                + config.age_coef * math.log(age + 1)
                + (config.primary_effect if primary else 0.0)
                + premia.get(token, 0.0)
                + eps
            )
            amount = _sig(math.exp(log_usd) / float(usd_px[token][t]))
            bx, by = (b % BLOCKS_PER_ROW) * BLOCK, (b // BLOCKS_PER_ROW) * BLOCK
            parcels = [(bx + dx, by + dy) for dx in range(w) for dy in range(h)]
            stamp = ts.strftime("%Y-%m-%dT%H:%M:%SZ")
            kind = "primary" if primary else "secondary"
            for (x, y), part in zip(parcels, _split(amount, lot)):
                out.writerow([f"tx{tx_no:07d}", stamp, x, y, _plain(part), token, kind, minted[b].isoformat()])
            tx_no += 1

    pbuf = io.StringIO()
    pout = csv.writer(pbuf, lineterminator="\n")
    pout.writerow(["date", "token", "usd_price"])
    for t in range(n_weeks):
        monday = config.start_monday + dt.timedelta(weeks=t)
        for d in range(7):
            day = (monday + dt.timedelta(days=d)).isoformat()
            for token in sorted(usd_px):
                px = usd_px[token][t]
                if px is not None:
                    pout.writerow([day, token, _plain(px)])

    truth: dict[str, dict[WeekId, float]] = {USD: {weeks[t]: float(delta_usd[t]) for t in range(n_weeks)}}
    for token, path in usd_px.items():
        truth[token] = {weeks[t]: float(delta_usd[t]) - math.log(float(px)) for t, px in enumerate(path) if px is not None}
    beta = {LOT: config.lot_elasticity, AGE: config.age_coef, PRIMARY: config.primary_effect}
    for token, v in premia.items():
        if token != "ETH":
            beta[settled_label(token)] = v
    return SynthMarket(buf.getvalue().encode("utf-8"), pbuf.getvalue().encode("utf-8"), GroundTruth(truth, beta))


def load_config(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)
