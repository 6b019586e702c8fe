"""``landex`` command line.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
Settings resolve as command-line flag, then ``--config`` file, then default.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import DataError, InvalidConfig, NumericalError
from .ingest import WinsorBounds
from .market import WeekId, canonical_denomination
from .pipeline import DEFAULT_DENOMS, Run, RunConfig, run_hedonic, run_ingest, run_report, run_repeat, run_stats
from .synth import SynthConfig, generate_market, load_config

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

# keys accepted in a run config file; same names as the long flags
CONFIG_KEYS = frozenset(
    {"tx", "prices", "denom", "winsor_low", "winsor_high", "out_dir", "row_price_mode", "base_week",
     "lenient_tokens", "hc", "quadratic_step2"}
)

DEFAULTS = {
    "denom": list(DEFAULT_DENOMS),
    "winsor_low": 0.001,
    "winsor_high": 0.999,
    "out_dir": "out",
    "row_price_mode": "per-parcel",
    "lenient_tokens": False,
    "hc": "HC0",
    "quadratic_step2": False,
}

NEEDS = {
    "ingest": ("tx",),
    "hedonic": ("tx", "prices"),
    "repeat": ("tx", "prices"),
    "stats": ("tx", "prices"),
    "report": ("tx", "prices"),
}

RUNNERS = {"ingest": run_ingest, "hedonic": run_hedonic, "repeat": run_repeat, "stats": run_stats, "report": run_report}


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    # defaults stay None so config-file values can fill the gaps
    p.add_argument("--tx", metavar="PATH", help="transactions.csv, one row per parcel")
    p.add_argument("--prices", metavar="PATH", help="prices.csv with daily USD token prices")
    p.add_argument(
        "--denom",
        action="append",
        metavar="TOKEN",
        help="denomination (USD, ETH, SAND, ...); repeatable; default USD, ETH and SAND",
    )
    p.add_argument("--winsor-low", type=float, metavar="Q", help="lower winsorization quantile (default 0.001)")
    p.add_argument("--winsor-high", type=float, metavar="Q", help="upper winsorization quantile (default 0.999)")
    p.add_argument("--out-dir", metavar="DIR", help="output directory (default ./out)")
    p.add_argument(
        "--row-price-mode",
        choices=("per-parcel", "per-bundle"),
        help="per-parcel: sum row amounts into the bundle price; per-bundle: every row carries the full price",
    )
    p.add_argument("--base-week", metavar="YYYY-WW", help="index base week (default: earliest observed)")
    p.add_argument(
        "--lenient-tokens",
        action="store_const",
        const=True,
        help="accept settlement tokens outside ETH/WETH/SAND/DAI/USDC",
    )
    p.add_argument("--hc", choices=("HC0", "HC1"), help="robust variance flavour (default HC0)")
    p.add_argument(
        "--quadratic-step2",
        action="store_const",
        const=True,
        help="add a squared holding-period term to the Case-Shiller variance regression",
    )
    p.add_argument("--config", metavar="PATH", help="flat key = value settings file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landex",
        description="Hedonic and repeat-sales price indices for virtual land, in any unit of account.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    helps = {
        "ingest": "validate inputs and echo bundle-level transactions",
        "hedonic": "all-sales hedonic index and coefficient table per denomination",
        "repeat": "Case-Shiller repeat-sales index and MOIC per denomination",
        "stats": (
            "summary statistics, SAND settlement share, relative ETH/SAND price index "
            "(weekly mean SAND price over mean ETH price; rises when SAND appreciates) and correlations"
        ),
        "report": "run everything and write report.md",
    }
    for name, text in helps.items():
        _pipeline_flags(sub.add_parser(name, help=text, description=text))
    sim = sub.add_parser("simulate", help="write a synthetic market with known ground truth")
    sim.add_argument("--seed", type=int, help="generator seed (overrides the config file)")
    sim.add_argument("--config", metavar="PATH", help="synth.toml with generator parameters")
    sim.add_argument("--out-dir", metavar="DIR", default="out", help="output directory (default ./out)")
    return parser


def _file_settings(path: Optional[str], parser: argparse.ArgumentParser) -> dict:
    if not path:
        return {}
    try:
        raw = load_config(path)
    except OSError as e:
        parser.error(f"cannot read config file: {e}")
    except ValueError as e:
        parser.error(f"bad config file {path}: {e}")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        parser.error(f"unknown keys in {path}: {sorted(unknown)}")
    settings = dict(raw)
    if isinstance(settings.get("denom"), str):
        settings["denom"] = [settings["denom"]]
    return settings


def resolve_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    settings = dict(DEFAULTS)
    settings.update(_file_settings(args.config, parser))
    for key in DEFAULTS.keys() | {"tx", "prices", "base_week"}:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value

    missing = [k for k in NEEDS[args.command] if not settings.get(k)]
    if missing:
        parser.error("the following arguments are required: " + ", ".join("--" + m for m in missing))
    for key in ("tx", "prices"):
        if settings.get(key) and not Path(settings[key]).is_file():
            parser.error(f"--{key}: no such file {settings[key]}")
    try:
        winsor = WinsorBounds(float(settings["winsor_low"]), float(settings["winsor_high"]))
    except ValueError as e:
        parser.error(f"winsor bounds: {e}")
    try:
        base = WeekId.parse(settings["base_week"]) if settings.get("base_week") else None
    except ValueError as e:
        parser.error(f"--base-week: {e}")
    denoms: list[str] = []
    for d in settings["denom"]:
        try:
            c = canonical_denomination(str(d))
        except DataError as e:
            parser.error(f"--denom: {e}")
        if c not in denoms:
            denoms.append(c)
    return RunConfig(
        tx_path=Path(settings["tx"]),
        prices_path=Path(settings["prices"]) if settings.get("prices") else None,
        denominations=tuple(denoms),
        winsor=winsor,
        out_dir=Path(settings["out_dir"]),
        row_price_mode=settings["row_price_mode"],
        strict_tokens=not settings["lenient_tokens"],
        base_week=base,
        hc_type=settings["hc"],
        quadratic_step2=bool(settings["quadratic_step2"]),
    )


def write_outputs(run: Run, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(run.files):
        (out_dir / name).write_bytes(run.files[name])


def _simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> Run:
    data = {}
    if args.config:
        try:
            data = load_config(args.config)
        except OSError as e:
            parser.error(f"cannot read config file: {e}")
        except ValueError as e:
            parser.error(f"bad config file {args.config}: {e}")
    cfg = SynthConfig.from_mapping(data, seed=args.seed)
    market = generate_market(cfg)
    run = Run()
    run.files["transactions.csv"] = market.transactions_csv
    run.files["prices.csv"] = market.prices_csv
    run.files["truth.csv"] = market.truth.to_csv()
    n_rows = market.transactions_csv.count(b"\n") - 1
    run.log.append(f"simulated seed {cfg.seed}: {n_rows} parcel rows over {cfg.n_weeks} weeks")
    return run


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "simulate":
            result = _simulate(args, parser)
            out_dir = Path(args.out_dir)
        else:
            cfg = resolve_config(args, parser)
            result = RUNNERS[args.command](cfg)
            out_dir = cfg.out_dir
    except SystemExit as e:
        return int(e.code or 0)
    except InvalidConfig as e:
        print(f"landex: config error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DataError as e:
        print(f"landex: data error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"landex: numerical error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    write_outputs(result, out_dir)
    for line in result.log:
        print(line)
    print(f"wrote {len(result.files)} files to {out_dir}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
