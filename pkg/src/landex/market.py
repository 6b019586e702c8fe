"""Core domain types shared across the pipeline.

Everything here is immutable once built. Monetary amounts stay as
:class:`decimal.Decimal` until the regression code turns log prices into
floats.
"""
from __future__ import annotations

import datetime as dt
import enum
import hashlib
import math
import re
from dataclasses import dataclass
from decimal import Decimal
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

from .errors import DuplicateParcel, DuplicatePriceRow, EmptyBundle, MissingPrice, NonPositivePrice, OutOfGrid, UnknownToken

GRID_SIZE = 408

KNOWN_TOKENS = ("ETH", "WETH", "SAND", "DAI", "USDC")
USD = "USD"

# label spelling used in regression output
_DISPLAY = {"WETH": "wETH"}


def canonical_token(symbol: str, strict: bool = True) -> str:
    """Upper-case a token symbol; in strict mode only registry symbols pass."""
    sym = symbol.strip().upper()
    if not sym:
        raise UnknownToken("empty token symbol")
    if strict and sym not in KNOWN_TOKENS:
        raise UnknownToken(f"token {symbol!r} not in registry {KNOWN_TOKENS}")
    return sym


def canonical_denomination(symbol: str, strict: bool = False) -> str:
    sym = symbol.strip().upper()
    if sym == USD:
        return USD
    return canonical_token(sym, strict=strict)


def display_token(symbol: str) -> str:
    return _DISPLAY.get(symbol, symbol)


class SaleKind(enum.Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"

    @classmethod
    def parse(cls, text: str) -> "SaleKind":
        return cls(text.strip().lower())


class ParcelCoord(NamedTuple):
    x: int
    y: int


def check_coord(c: ParcelCoord) -> ParcelCoord:
    if not (0 <= c.x < GRID_SIZE and 0 <= c.y < GRID_SIZE):
        raise OutOfGrid(f"parcel {tuple(c)} outside the {GRID_SIZE}x{GRID_SIZE} map")
    return c


@dataclass(frozen=True, order=True)
class BundleKey:
    coords: tuple[ParcelCoord, ...]

    @property
    def lot_size(self) -> int:
        return len(self.coords)

    def digest(self) -> str:
        """Short stable hash, used as the bundle id in emitted files."""
        text = ";".join(f"{c.x},{c.y}" for c in self.coords)
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


def canonical_bundle_key(coords: Iterable[tuple[int, int]]) -> BundleKey:
    """Sorted, duplicate-free key for a set of parcels.

    Any ordering of the same parcels gives the same key. Repeated parcels are
    an error rather than silently merged.
    """
    items = [check_coord(ParcelCoord(int(x), int(y))) for x, y in coords]
    if not items:
        raise EmptyBundle("bundle has no parcels")
    items.sort()
    for a, b in zip(items, items[1:]):
        if a == b:
            raise DuplicateParcel(f"parcel {tuple(a)} appears twice")
    return BundleKey(tuple(items))


_WEEK_RE = re.compile(r"^\s*(\d{4})-?W?(\d{1,2})\s*$", re.IGNORECASE)
_EPOCH_MONDAY = dt.date(1970, 1, 5)


class WeekId(NamedTuple):
    """ISO-8601 year and week. Tuple ordering is chronological."""

    iso_year: int
    iso_week: int

    @classmethod
    def parse(cls, text: str) -> "WeekId":
        m = _WEEK_RE.match(text)
        if not m:
            raise ValueError(f"bad week {text!r}, expected YYYY-WW")
        year, week = int(m.group(1)), int(m.group(2))
        dt.date.fromisocalendar(year, week, 1)  # validates week 53
        return cls(year, week)

    @classmethod
    def from_ordinal(cls, n: int) -> "WeekId":
        y, w, _ = (_EPOCH_MONDAY + dt.timedelta(weeks=n)).isocalendar()
        return cls(y, w)

    def monday(self) -> dt.date:
        return dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)

    @property
    def ordinal(self) -> int:
        """Whole weeks since the Monday 1970-01-05; differences are holding periods."""
        return (self.monday() - _EPOCH_MONDAY).days // 7

    def label(self) -> str:
        return f"{self.iso_year}-W{self.iso_week:02d}"


def week_of(timestamp: dt.datetime) -> WeekId:
    d = as_utc(timestamp).date()
    y, w, _ = d.isocalendar()
    return WeekId(y, w)


def as_utc(ts: dt.datetime) -> dt.datetime:
    if ts.tzinfo is None:
        raise ValueError("timestamp must be timezone aware")
    return ts.astimezone(dt.timezone.utc)


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    bundle: BundleKey
    lot_size: int
    timestamp: dt.datetime
    price_amount: Decimal
    settlement: str
    sale_kind: SaleKind
    mint_date: dt.date
    age_days: int

    def __post_init__(self):
        if self.lot_size != self.bundle.lot_size:
            raise ValueError("lot_size must equal the bundle parcel count")
        if self.age_days < 0:
            raise ValueError("age_days must be non-negative")

    @cached_property
    def date(self) -> dt.date:
        return as_utc(self.timestamp).date()

    @cached_property
    def week(self) -> WeekId:
        return week_of(self.timestamp)

    @property
    def is_primary(self) -> bool:
        return self.sale_kind is SaleKind.PRIMARY


@dataclass(frozen=True)
class DenominatedSale:
    source: Transaction
    denomination: str
    price: Decimal
    log_price: float


class PriceTable:
    """Daily USD price per token, keyed by (date, token)."""

    def __init__(self, entries: Mapping[tuple[dt.date, str], Decimal]):
        for (day, token), px in entries.items():
            if not px > 0:
                raise NonPositivePrice(f"{token} on {day}: {px}")
        self._entries = MappingProxyType(dict(entries))

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[dt.date, str, Decimal]]) -> "PriceTable":
        entries: dict[tuple[dt.date, str], Decimal] = {}
        for day, token, px in rows:
            key = (day, token)
            if key in entries:
                raise DuplicatePriceRow(f"duplicate price for {token} on {day}")
            entries[key] = px
        return cls(entries)

    @property
    def entries(self) -> Mapping[tuple[dt.date, str], Decimal]:
        return self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._entries

    def usd(self, token: str, day: dt.date) -> Decimal:
        if token == USD:
            return Decimal(1)
        try:
            return self._entries[(day, token)]
        except KeyError:
            raise MissingPrice(f"no {token} price on {day}") from None

    def tokens(self) -> list[str]:
        return sorted({t for _, t in self._entries})

    def daily(self, token: str) -> list[tuple[dt.date, Decimal]]:
        return sorted((d, p) for (d, t), p in self._entries.items() if t == token)


def log_of(price: Decimal) -> float:
    return math.log(float(price))
