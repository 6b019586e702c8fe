import datetime as dt
import sys
from decimal import Decimal
from pathlib import Path

import pytest

from landex.ingest import compute_age
from landex.market import PriceTable, SaleKind, Transaction, canonical_bundle_key

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

UTC = dt.timezone.utc


def ts(text: str) -> dt.datetime:
    return dt.datetime.fromisoformat(text).replace(tzinfo=UTC)


def make_tx(
    tx_id,
    when,
    coords=((0, 0),),
    price="1",
    token="ETH",
    kind="secondary",
    mint=None,
):
    when = ts(when) if isinstance(when, str) else when
    mint = dt.date.fromisoformat(mint) if isinstance(mint, str) else (mint or when.date())
    key = canonical_bundle_key(coords)
    return Transaction(
        tx_id=tx_id,
        bundle=key,
        lot_size=key.lot_size,
        timestamp=when,
        price_amount=Decimal(str(price)),
        settlement=token,
        sale_kind=SaleKind(kind),
        mint_date=mint,
        age_days=compute_age(mint, when),
    )


def week_monday(year: int, week: int, hour: int = 12) -> dt.datetime:
    return dt.datetime.combine(dt.date.fromisocalendar(year, week, 1), dt.time(hour), UTC)


def flat_table(start: str, days: int, prices: dict) -> PriceTable:
    """Constant USD price per token over a date range."""
    d0 = dt.date.fromisoformat(start)
    rows = []
    for i in range(days):
        for token, px in prices.items():
            rows.append((d0 + dt.timedelta(days=i), token, Decimal(str(px))))
    return PriceTable.from_rows(rows)


@pytest.fixture
def fixture_paths():
    return FIXTURES / "transactions.csv", FIXTURES / "prices.csv"


def synth_inputs(config):
    """Generate a market and push it through the real parsers."""
    from landex.ingest import load_bundles, parse_price_table
    from landex.synth import generate_market

    market = generate_market(config)
    _, txs, rejected = load_bundles(market.transactions_csv)
    assert rejected == []
    return txs, parse_price_table(market.prices_csv), market.truth


def native_sales(txs):
    """Sales priced in their own settlement token, no conversion."""
    from landex.market import DenominatedSale, log_of

    return [DenominatedSale(tx, tx.settlement, tx.price_amount, log_of(tx.price_amount)) for tx in txs]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
