"""Reading exported sale/price files and turning parcel rows into bundle sales."""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Sequence, Union

from .errors import (
    BadTimestamp,
    EmptyBundle,
    EmptyInput,
    InconsistentGroup,
    MalformedRow,
    MissingPrice,
    NegativeAge,
    OutOfGrid,
    ZeroPrice,
)
from .market import (
    DenominatedSale,
    ParcelCoord,
    PriceTable,
    SaleKind,
    Transaction,
    as_utc,
    canonical_bundle_key,
    canonical_token,
    check_coord,
    log_of,
)

TX_COLUMNS = ("tx_id", "timestamp", "parcel_x", "parcel_y", "price_amount", "token", "sale_type", "mint_date")
PRICE_COLUMNS = ("date", "token", "usd_price")

Source = Union[bytes, str, IO[bytes], IO[str]]


@dataclass(frozen=True)
class RawSaleRecord:
    tx_id: str
    timestamp: dt.datetime
    parcel: ParcelCoord
    price_amount: Decimal
    settlement: str
    sale_kind: SaleKind
    mint_date: dt.date


@dataclass(frozen=True)
class WinsorBounds:
    low_q: float = 0.001
    high_q: float = 0.999

    def __post_init__(self):
        if not (0 <= self.low_q < self.high_q <= 1):
            raise ValueError(f"need 0 <= low_q < high_q <= 1, got ({self.low_q}, {self.high_q})")


@dataclass(frozen=True)
class RejectedGroup:
    tx_id: str
    records: tuple[RawSaleRecord, ...]
    reason: str


def _reader(source: Source, columns: Sequence[str]) -> Iterable[tuple[int, dict]]:
    if isinstance(source, bytes):
        text = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        text = io.StringIO(source)
    else:
        data = source.read()
        text = io.StringIO(data.decode("utf-8") if isinstance(data, bytes) else data)
    reader = csv.reader(text)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedRow(1, "missing header") from None
    missing = [c for c in columns if c not in header]
    if missing:
        raise MalformedRow(1, f"header lacks columns {missing}")
    for row in reader:
        line = reader.line_num
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
        yield line, dict(zip(header, (f.strip() for f in row)))


def parse_timestamp(text: str) -> dt.datetime:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        ts = dt.datetime.fromisoformat(s)
    except ValueError:
        raise BadTimestamp(f"unparseable timestamp {text!r}") from None
    if ts.tzinfo is None:
        raise BadTimestamp(f"timestamp {text!r} has no UTC offset")
    return as_utc(ts)


def _decimal(text: str, line: int, field: str) -> Decimal:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise MalformedRow(line, f"{field} {text!r} is not a decimal") from None
    if not value.is_finite():
        raise MalformedRow(line, f"{field} {text!r} is not finite")
    return value


def _date(text: str, line: int, field: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise MalformedRow(line, f"{field} {text!r} is not YYYY-MM-DD") from None


def parse_transactions(source: Source, strict: bool = True) -> list[RawSaleRecord]:
    """Parse a ``transactions.csv`` export, one record per parcel row, in file order.

    With ``strict`` off, token symbols outside the registry are accepted
    (upper-cased) instead of raising :class:`UnknownToken`.
    """
    out = []
    for line, row in _reader(source, TX_COLUMNS):
        tx_id = row["tx_id"]
        if not tx_id:
            raise MalformedRow(line, "empty tx_id")
        try:
            ts = parse_timestamp(row["timestamp"])
        except BadTimestamp as e:
            raise BadTimestamp(f"line {line}: {e}") from None
        try:
            parcel = check_coord(ParcelCoord(int(row["parcel_x"]), int(row["parcel_y"])))
        except ValueError:
            raise MalformedRow(line, "parcel coordinates must be integers") from None
        except OutOfGrid as e:
            raise OutOfGrid(f"line {line}: {e}") from None
        amount = _decimal(row["price_amount"], line, "price_amount")
        if amount < 0:
            raise MalformedRow(line, "negative price_amount")
        try:
            kind = SaleKind.parse(row["sale_type"])
        except ValueError:
            raise MalformedRow(line, f"sale_type {row['sale_type']!r} not primary/secondary") from None
        token = canonical_token(row["token"], strict=strict)
        out.append(
            RawSaleRecord(
                tx_id=tx_id,
                timestamp=ts,
                parcel=parcel,
                price_amount=amount,
                settlement=token,
                sale_kind=kind,
                mint_date=_date(row["mint_date"], line, "mint_date"),
            )
        )
    return out


def parse_price_table(source: Source) -> PriceTable:
    rows = []
    for line, row in _reader(source, PRICE_COLUMNS):
        day = _date(row["date"], line, "date")
        token = canonical_token(row["token"], strict=False)
        rows.append((day, token, _decimal(row["usd_price"], line, "usd_price")))
    return PriceTable.from_rows(rows)


def is_contiguous(coords: Iterable[tuple[int, int]]) -> bool:
    """True when the parcels form one edge-connected (4-neighbour) region."""
    cells = {(int(x), int(y)) for x, y in coords}
    if not cells:
        raise EmptyBundle("no parcels")
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(cells)


def compute_age(mint_date: dt.date, timestamp: dt.datetime) -> int:
    days = (as_utc(timestamp).date() - mint_date).days
    if days < 0:
        raise NegativeAge(f"sale on {as_utc(timestamp).date()} precedes mint on {mint_date}")
    return days


def aggregate_to_bundles(
    records: Sequence[RawSaleRecord], row_price_mode: str = "per-parcel"
) -> tuple[list[Transaction], list[RejectedGroup]]:
    """Collapse parcel rows sharing a tx_id into one bundle-level transaction.

    Output keeps the order in which each tx_id first appears. Groups whose
    parcels are not edge-connected are returned separately, untouched.
    """
    if row_price_mode not in ("per-parcel", "per-bundle"):
        raise ValueError(f"unknown row price mode {row_price_mode!r}")
    groups: dict[str, list[RawSaleRecord]] = defaultdict(list)
    for r in records:
        groups[r.tx_id].append(r)

    accepted, rejected = [], []
    for tx_id, rows in groups.items():
        first = rows[0]
        for r in rows[1:]:
            if (r.timestamp, r.settlement, r.sale_kind) != (first.timestamp, first.settlement, first.sale_kind):
                raise InconsistentGroup(f"tx {tx_id}: parcels disagree on timestamp, token or sale type")
        coords = [r.parcel for r in rows]
        key = canonical_bundle_key(coords)
        if not is_contiguous(coords):
            rejected.append(RejectedGroup(tx_id, tuple(rows), "non-contiguous"))
            continue
        if row_price_mode == "per-parcel":
            price = sum((r.price_amount for r in rows), Decimal(0))
        else:
            price = first.price_amount
        mint = min(r.mint_date for r in rows)
        accepted.append(
            Transaction(
                tx_id=tx_id,
                bundle=key,
                lot_size=key.lot_size,
                timestamp=first.timestamp,
                price_amount=price,
                settlement=first.settlement,
                sale_kind=first.sale_kind,
                mint_date=mint,
                age_days=compute_age(mint, first.timestamp),
            )
        )
    return accepted, rejected


def convert(tx: Transaction, target: str, table: PriceTable) -> DenominatedSale:
    """Express a sale in ``target`` units using same-day USD prices of both tokens."""
    if tx.price_amount <= 0:
        raise ZeroPrice(f"tx {tx.tx_id} has price {tx.price_amount}")
    if target == tx.settlement:
        price = tx.price_amount
    else:
        day = tx.date
        price = tx.price_amount * table.usd(tx.settlement, day) / table.usd(target, day)
    return DenominatedSale(tx, target, price, log_of(price))


@dataclass
class Denominated:
    sales: list[DenominatedSale]
    missing_price: int = 0
    zero_price: int = 0


def denominate(txs: Iterable[Transaction], target: str, table: PriceTable) -> Denominated:
    """Convert every transaction it can; unpriceable ones are counted, not raised.

    Missing exchange rates are how pre-introduction SAND sales drop out of a
    SAND-denominated run.
    """
    out = Denominated([])
    for tx in txs:
        try:
            out.sales.append(convert(tx, target, table))
        except MissingPrice:
            out.missing_price += 1
        except ZeroPrice:
            out.zero_price += 1
    return out


def quantile(sorted_values: Sequence, q):
    """Linear-interpolation quantile at position (n-1)*q on pre-sorted data.

    Works on Decimal input (pass ``q`` as Decimal for exact arithmetic) or floats.
    """
    n = len(sorted_values)
    if n == 0:
        raise EmptyInput("quantile of empty data")
    h = (n - 1) * q
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    a, b = sorted_values[lo], sorted_values[hi]
    if frac == 0 or a == b:
        return a
    return a + frac * (b - a)


def winsorize(values: Sequence, bounds: WinsorBounds) -> list:
    """Clamp values into [Q(low_q), Q(high_q)], keeping input order."""
    if len(values) == 0:
        raise EmptyInput("nothing to winsorize")
    ordered = sorted(values)
    if isinstance(ordered[0], Decimal):
        lo_q, hi_q = Decimal(repr(bounds.low_q)), Decimal(repr(bounds.high_q))
    else:
        lo_q, hi_q = bounds.low_q, bounds.high_q
    lo = quantile(ordered, lo_q)
    hi = quantile(ordered, hi_q)
    return [min(max(v, lo), hi) for v in values]


def load_bundles(
    tx_source: Source, strict: bool = True, row_price_mode: str = "per-parcel"
) -> tuple[list[RawSaleRecord], list[Transaction], list[RejectedGroup]]:
    records = parse_transactions(tx_source, strict=strict)
    txs, rejected = aggregate_to_bundles(records, row_price_mode=row_price_mode)
    return records, txs, rejected

