import datetime as dt
import math
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from landex.errors import DuplicateParcel, EmptyBundle, OutOfGrid, UnknownToken
from landex.ingest import convert
from landex.market import (
    BundleKey,
    ParcelCoord,
    WeekId,
    canonical_bundle_key,
    canonical_token,
    week_of,
)

from conftest import UTC, flat_table, make_tx

coords = st.tuples(st.integers(0, 407), st.integers(0, 407))


def test_bundle_key_sorts():
    assert canonical_bundle_key({(1, 0), (0, 0)}) == BundleKey((ParcelCoord(0, 0), ParcelCoord(1, 0)))
    assert canonical_bundle_key({(5, 5)}).coords == (ParcelCoord(5, 5),)


@pytest.mark.parametrize(
    "parcels, exc",
    [([], EmptyBundle), ([(0, 0), (0, 0)], DuplicateParcel), ([(408, 0)], OutOfGrid), ([(0, -1)], OutOfGrid)],
)
def test_bundle_key_errors(parcels, exc):
    with pytest.raises(exc):
        canonical_bundle_key(parcels)


@given(st.sets(coords, min_size=1, max_size=20), st.randoms())
def test_bundle_key_order_insensitive(cells, rnd):
    items = list(cells)
    rnd.shuffle(items)
    key = canonical_bundle_key(items)
    assert key == canonical_bundle_key(sorted(cells))
    assert canonical_bundle_key(key.coords) == key
    assert key.lot_size == len(cells)


def test_token_canonicalisation():
    assert canonical_token("weth") == "WETH"
    assert canonical_token(" Sand ") == "SAND"
    with pytest.raises(UnknownToken):
        canonical_token("FOO")
    assert canonical_token("foo", strict=False) == "FOO"


@pytest.mark.parametrize(
    "stamp, expected",
    [
        ("2019-12-05T12:00:00", (2019, 49)),
        ("2020-08-14T00:00:00", (2020, 33)),
        ("2021-01-01T00:00:00", (2020, 53)),
    ],
)
def test_week_of(stamp, expected):
    assert week_of(dt.datetime.fromisoformat(stamp).replace(tzinfo=UTC)) == WeekId(*expected)


def test_week_of_uses_utc_date():
    # 23:30 on Sunday in UTC-2 is already Monday in UTC
    local = dt.datetime(2021, 1, 3, 23, 30, tzinfo=dt.timezone(dt.timedelta(hours=-2)))
    assert week_of(local) == WeekId(2021, 1)


@given(st.datetimes(min_value=dt.datetime(2015, 1, 1), max_value=dt.datetime(2030, 1, 1)), st.timedeltas(min_value=dt.timedelta(0), max_value=dt.timedelta(days=800)))
def test_week_of_monotone(t1, gap):
    a = t1.replace(tzinfo=UTC)
    b = a + gap
    wa, wb = week_of(a), week_of(b)
    assert wa <= wb
    assert wb.ordinal - wa.ordinal >= 0


def test_week_parse_and_ordinal():
    w = WeekId.parse("2020-33")
    assert w == WeekId.parse("2020-W33") == WeekId(2020, 33)
    assert WeekId.from_ordinal(w.ordinal) == w
    assert WeekId(2021, 1).ordinal - WeekId(2020, 53).ordinal == 1
    with pytest.raises(ValueError):
        WeekId.parse("2021-53")


@given(st.decimals(min_value=Decimal("0.000001"), max_value=Decimal("1e9"), places=6))
def test_log_price_matches_price(amount):
    tx = make_tx("a", "2021-01-04T10:00:00", price=amount, token="ETH")
    table = flat_table("2021-01-01", 10, {"ETH": "731.25"})
    sale = convert(tx, "USD", table)
    assert math.exp(sale.log_price) == pytest.approx(float(sale.price), rel=1e-12)
