"""Shared plumbing for the experiment scripts."""
from landex.ingest import load_bundles, parse_price_table
from landex.synth import SynthConfig, generate_market


def simulate(config: SynthConfig):
    market = generate_market(config)
    _, txs, rejected = load_bundles(market.transactions_csv)
    if rejected:
        raise RuntimeError(f"generator produced {len(rejected)} non-contiguous sales")
    return txs, parse_price_table(market.prices_csv), market.truth
