"""Acceptance suite: twelve criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""
import dataclasses
import math
import sys
import time
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from landex.cli import run as cli_run
from landex.errors import EmptyBundle
from landex.hedonic import PRIMARY, HedonicSpec, hedonic_index, settled_label
from landex.ingest import WinsorBounds, denominate, is_contiguous, winsorize
from landex.market import USD, DenominatedSale, log_of
from landex.regress import ols
from landex.repeat_sales import (
    RepeatSalePair,
    build_repeat_system,
    case_shiller_index,
    match_repeat_sales,
    moic,
)
from landex.synth import SynthConfig

sys.path.insert(0, str(Path(__file__).parent))
from conftest import FIXTURES, GOLDEN, flat_table, make_tx, synth_inputs, week_monday  # noqa: E402
from oracles import UnionFind, normal_equations  # noqa: E402

RESULTS: dict[int, str] = {}
NO_WINSOR = WinsorBounds(0.0, 1.0)


def record(n, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def usd(txs, table):
    return denominate(txs, USD, table).sales


def log_err(index, truth):
    base = index.base_week
    return np.array([math.log(p.level) - (truth[p.week] - truth[base]) for p in index.points])


# 1 ---------------------------------------------------------------------------
def criterion_1():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    worst_rel = worst_orth = 0.0
    done = 0
    while done < 200:
        X = rng.normal(size=(50, 5))
        if np.linalg.cond(X) > 100:
            continue
        y = X @ rng.normal(size=5) + rng.normal(size=50)
        res = ols(X, y)
        ref = np.array(normal_equations(X.tolist(), y.tolist()))
        worst_rel = max(worst_rel, float(np.max(np.abs(res.coefficients - ref) / np.abs(ref))))
        e = res.residuals
        worst_orth = max(worst_orth, float(np.linalg.norm(X.T @ e) / (np.linalg.norm(X) * np.linalg.norm(e))))
        done += 1
    elapsed = time.perf_counter() - start
    ok = worst_rel < 1e-8 and worst_orth < 1e-8 and elapsed < 5
    return ok, f"200 systems, max rel err {worst_rel:.2e}, max orthogonality {worst_orth:.2e}, {elapsed:.2f}s"


# 2 ---------------------------------------------------------------------------
def criterion_2():
    res = ols([[1.0], [2.0]], [1.0, 6.0])
    db = abs(res.coefficients[0] - 2.6)
    dse = abs(res.robust_se[0] - math.sqrt(0.2048))
    return db <= 1e-12 and dse <= 1e-12, f"beta {float(res.coefficients[0])!r}, SE {float(res.robust_se[0])!r} (errors {db:.1e}, {dse:.1e})"


# 3 ---------------------------------------------------------------------------
def criterion_3():
    start = time.perf_counter()
    exact = SynthConfig(seed=0, n_weeks=30, n_bundles=1500, sales_per_week=150, noise_base_var=0.0)
    txs, table, truth = synth_inputs(exact)
    index, res = hedonic_index(usd(txs, table), HedonicSpec(winsor=NO_WINSOR))
    delta_err = float(np.max(np.abs(log_err(index, truth.log_delta[USD]))))
    beta_err = max(abs(res.coef(k) - v) for k, v in truth.beta.items() if k in res.labels)
    r2_err = abs(res.adj_r_squared - 1.0)

    noisy = SynthConfig(seed=0, n_weeks=100, n_bundles=8000, sales_per_week=200, noise_base_var=0.04)
    txs, table, truth = synth_inputs(noisy)
    index, _ = hedonic_index(usd(txs, table), HedonicSpec())
    noisy_err = float(np.max(np.abs(log_err(index, truth.log_delta[USD]))))
    elapsed = time.perf_counter() - start
    ok = delta_err <= 1e-8 and beta_err <= 1e-8 and r2_err <= 1e-10 and noisy_err < 0.05 and elapsed < 10
    return ok, (
        f"zero noise: max delta err {delta_err:.1e}, max beta err {beta_err:.1e}, |adjR2-1| {r2_err:.1e}; "
        f"sigma 0.2 with {len(txs)} sales over {len(index.points)} weeks: max log err {noisy_err:.4f}; {elapsed:.1f}s"
    )


# 4 ---------------------------------------------------------------------------
def _chain_pair(buy, sell, dlog, cell):
    b = make_tx(f"b{cell}", week_monday(2021, 10 + buy), coords=[cell], price="1", mint="2021-01-01")
    s = make_tx(f"s{cell}", week_monday(2021, 10 + sell, 13), coords=[cell], price=Decimal(repr(math.exp(dlog))), mint="2021-01-01")
    return RepeatSalePair(b.bundle, b, s)


def criterion_4():
    table = flat_table("2021-01-01", 200, {"ETH": 3000})
    pairs = [_chain_pair(0, 1, 0.1, (0, 0)), _chain_pair(1, 2, 0.3, (1, 0))]
    index, _ = case_shiller_index(pairs, "ETH", table)
    want = np.array([1.0, math.exp(0.1), math.exp(0.4)])
    err = float(np.max(np.abs(index.levels - want)))
    return err <= 1e-12, f"levels {[round(float(v), 12) for v in index.levels]}, max abs err {err:.1e}"


# 5 ---------------------------------------------------------------------------
CS_CONFIG = dict(
    n_weeks=50,
    n_bundles=1200,
    sales_per_week=130,
    age_coef=0.0,
    primary_effect=0.0,
    settlement_premia={},
    noise_base_var=0.01,
    noise_slope=0.002,
)


def criterion_5():
    corrs, slopes_up = [], 0
    for seed in range(100):
        txs, table, truth = synth_inputs(SynthConfig(seed=seed, **CS_CONFIG))
        pairs = match_repeat_sales(txs)
        keep = np.sort(np.random.default_rng(seed).choice(len(pairs), size=5000, replace=False))
        sample = [pairs[i] for i in keep]
        index, diag = case_shiller_index(sample, USD, table)
        true = truth.log_delta[USD]
        est = np.log(index.levels)
        ref = np.array([true[w] for w in index.weeks])
        corrs.append(float(np.corrcoef(est, ref)[0, 1]))
        slopes_up += diag.step2_slope > 0
    ok = min(corrs) > 0.98 and slopes_up >= 95
    return ok, f"5000 pairs x 100 seeds: min corr {min(corrs):.4f}, step-2 slope positive in {slopes_up}/100"


# 6 ---------------------------------------------------------------------------
def criterion_6():
    rng = np.random.default_rng(6)
    table = flat_table("2021-01-01", 200, {"ETH": 3000})
    pairs = []
    for t in range(10):
        for j in range(4):
            pairs.append(_chain_pair(t, t + 1, 0.05 * t + 0.1 * rng.normal(), (t, j)))
    index, diag = case_shiller_index(pairs, "ETH", table)
    step1 = np.exp(np.concatenate([[0.0], diag.step1.coefficients]))
    err = float(np.max(np.abs(index.levels - step1) / step1))
    constant = diag.weight_min == diag.weight_max and not diag.uniform_weights
    return constant and err <= 1e-12, f"all holds 1 week, constant step-2 fit {constant}, max rel diff step 3 vs step 1 {err:.1e}"


# 7 ---------------------------------------------------------------------------
def criterion_7():
    table = flat_table("2021-01-01", 200, {"ETH": 3000, "WETH": 2990, "SAND": "0.7", "DAI": 1, "USDC": 1})
    got = {}
    for token in ("ETH", "WETH", "SAND", "DAI", "USDC"):
        b = make_tx("b", week_monday(2021, 3), price="100", token=token, mint="2021-01-01")
        s = make_tx("s", week_monday(2021, 9), price="200", token=token, mint="2021-01-01")
        got[token] = moic(RepeatSalePair(b.bundle, b, s), token, table)
    b = make_tx("b", week_monday(2021, 3), price="100", token="ETH", mint="2021-01-01")
    s = make_tx("s", week_monday(2021, 9), price="200", token="ETH", mint="2021-01-01")
    got[USD] = moic(RepeatSalePair(b.bundle, b, s), USD, table)
    ok = all(v == 2.0 for v in got.values())
    return ok, "MOIC " + ", ".join(f"{k} {v!r}" for k, v in got.items())


# 8 ---------------------------------------------------------------------------
def criterion_8():
    fixture = winsorize([Decimal(v) for v in (1, 2, 3, 4, 100)], WinsorBounds(0.0, 0.8))
    fixture_ok = fixture == [1, 2, 3, 4, Decimal("23.2")]
    rng = np.random.default_rng(8)
    broken = 0
    for _ in range(1000):
        n = int(rng.integers(2, 200))
        xs = (rng.lognormal(0, 1.5, size=n)).tolist()
        lo = float(rng.uniform(0, 0.2))
        bounds = WinsorBounds(lo, float(rng.uniform(lo + 0.5, 1.0)))
        once = winsorize(xs, bounds)
        if winsorize(once, bounds) != once:
            broken += 1
    ok = fixture_ok and broken == 0
    return ok, (
        f"fixture {[str(v) for v in fixture]} ({'exact' if fixture_ok else 'mismatch'}); "
        f"idempotence failed on {broken}/1000 random vectors"
    )


# 9 ---------------------------------------------------------------------------
def _components(cells):
    uf = UnionFind(cells)
    for x, y in cells:
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in cells:
                uf.union((x, y), nb)
    return len({uf.find(c) for c in cells})


def criterion_9():
    grid = [(x, y) for x in range(3) for y in range(3)]
    agree = 0
    for mask in range(512):
        cells = {c for i, c in enumerate(grid) if mask >> i & 1}
        comps = _components(cells)
        try:
            mine = is_contiguous(cells)
        except EmptyBundle:
            mine = None
        want = None if comps == 0 else comps == 1
        agree += mine == want
    return agree == 512, f"agreement with union-find on {agree}/512 subsets of a 3x3 grid"


# 10 --------------------------------------------------------------------------
def _scaled(sales, k):
    k = Decimal(k)
    return [DenominatedSale(s.source, s.denomination, s.price * k, log_of(s.price * k)) for s in sales]


def _native(txs):
    return [DenominatedSale(t, t.settlement, t.price_amount, log_of(t.price_amount)) for t in txs]


def criterion_10():
    txs, table, _ = synth_inputs(SynthConfig(seed=10, n_weeks=20, n_bundles=400, sales_per_week=80))
    sales = usd(txs, table)
    h1, r1 = hedonic_index(sales, HedonicSpec())
    h2, r2 = hedonic_index(_scaled(sales, "13.7"), HedonicSpec())
    pairs = match_repeat_sales(txs)
    c1, _ = case_shiller_index(pairs, USD, table)
    scaled_pairs = match_repeat_sales([dataclasses.replace(t, price_amount=t.price_amount * Decimal("13.7")) for t in txs])
    c2, _ = case_shiller_index(scaled_pairs, USD, table)

    # every settlement token trades at one constant USD rate
    flat = flat_table("2020-08-01", 200, {k: 2500 for k in ("ETH", "WETH", "SAND", "DAI", "USDC")})
    h3, r3 = hedonic_index(_native(txs), HedonicSpec())
    h4, r4 = hedonic_index(usd(txs, flat), HedonicSpec())
    c3, _ = case_shiller_index(pairs, "ETH", flat)
    c4, _ = case_shiller_index(pairs, USD, flat)
    native_dlog = np.array([math.log(p.sell.price_amount / p.buy.price_amount) for p in pairs if p.hold_weeks > 0])

    def rel(a, b):
        return float(np.max(np.abs(a.levels - b.levels) / b.levels))

    def coef_diff(ra, rb):
        return max(abs(ra.coef(t) - rb.coef(t)) for t in rb.labels if not t.startswith("week:"))

    diffs = {
        "hedonic scale": rel(h2, h1),
        "hedonic coefs scale": coef_diff(r2, r1),
        "repeat scale": rel(c2, c1),
        "hedonic fx": rel(h4, h3),
        "hedonic coefs fx": coef_diff(r4, r3),
        "repeat fx": rel(c4, c3),
    }
    # the ETH run through a flat table must equal the raw native price changes
    sys_eth = build_repeat_system(pairs, "ETH", flat)
    diffs["repeat native dlog"] = float(np.max(np.abs(sys_eth.dlog - native_dlog)))
    worst = max(diffs.values())
    return worst <= 1e-10, "max diffs " + ", ".join(f"{k} {v:.1e}" for k, v in diffs.items())


# 11 --------------------------------------------------------------------------
def criterion_11():
    targets = (PRIMARY, settled_label("WETH"), settled_label("SAND"))
    failures, worst_z = [], 0.0
    for seed in range(20):
        txs, table, truth = synth_inputs(SynthConfig(seed=seed))
        _, res = hedonic_index(usd(txs, table), HedonicSpec())
        for term in targets:
            est, se, true = res.coef(term), res.se(term), truth.beta[term]
            z = (est - true) / se
            worst_z = max(worst_z, abs(z))
            if math.copysign(1, est) != math.copysign(1, true) or abs(z) >= 3:
                failures.append(f"seed {seed} {term} est {est:.4f} true {true} z {z:+.2f}")
    ok = not failures
    detail = f"20 seeds x 3 terms, max |z| {worst_z:.2f}"
    if failures:
        detail += "; outside: " + "; ".join(failures)
    return ok, detail


# 12 --------------------------------------------------------------------------
def criterion_12(tmp: Path):
    argv = ["report", "--tx", str(FIXTURES / "transactions.csv"), "--prices", str(FIXTURES / "prices.csv")]
    codes = [cli_run([*argv, "--out-dir", str(tmp / d)]) for d in ("one", "two")]
    names = sorted(p.name for p in GOLDEN.iterdir())
    produced = sorted(p.name for p in (tmp / "one").iterdir())
    same_runs = all((tmp / "one" / n).read_bytes() == (tmp / "two" / n).read_bytes() for n in produced)
    mismatched = [n for n in names if not (tmp / "one" / n).exists() or (tmp / "one" / n).read_bytes() != (GOLDEN / n).read_bytes()]
    ok = codes == [0, 0] and same_runs and names == produced and not mismatched
    return ok, f"{len(produced)} files, runs identical {same_runs}, golden mismatches {mismatched or 'none'}"


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, detail = CRITERIA[n]()
    assert record(n, ok, detail), RESULTS[n]


def test_criterion_12(tmp_path):
    ok, detail = criterion_12(tmp_path)
    assert record(12, ok, detail), RESULTS[12]


if __name__ == "__main__":
    import tempfile

    passed = 0
    for n, fn in CRITERIA.items():
        passed += record(n, *fn())
    with tempfile.TemporaryDirectory() as d:
        passed += record(12, *criterion_12(Path(d)))
    print(f"{passed}/12 criteria pass")
