"""Command-line entry point: ``lorakey <subcommand> ...``.

Exit codes: 0 success, 1 failure (or some sweep cells failed), 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .channel import export_trace, ingest_trace, simulate_trace
from .dsp import negotiate_filter
from .errors import ConfigurationError, LoraKeyError, ParameterError
from .keygen import generate_key, read_keys, write_keys
from .randomness import run_suite
from .runner import (
    SCENARIOS,
    CellResult,
    ExperimentConfig,
    analyze_trace,
    config_from_mapping,
    emit_reports,
    load_config,
    run_sweep,
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("lorakey")

_CONFIG_FIELDS = [f.name for f in fields(ExperimentConfig)]


def _add_config_flags(p: argparse.ArgumentParser, skip: tuple[str, ...] = ()) -> None:
    p.add_argument("--config", type=Path, help="INI file with an [experiment] section")
    group = p.add_argument_group("experiment settings (override the config file)")
    for name in _CONFIG_FIELDS:
        if name in skip:
            continue
        group.add_argument(f"--{name.replace('_', '-')}", dest=f"cfg_{name}", metavar="VALUE")


def _config(args) -> ExperimentConfig:
    base = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {
        name: getattr(args, f"cfg_{name}")
        for name in _CONFIG_FIELDS
        if getattr(args, f"cfg_{name}", None) is not None
    }
    return config_from_mapping(overrides, base)


def _write_or_print(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_simulate(args) -> int:
    config = _config(args)
    if args.scenario not in SCENARIOS:
        raise ConfigurationError("scenario", f"unknown {args.scenario!r}")
    trace = simulate_trace(*config.setup(args.scenario, args.r_lambda, args.seed))
    export_trace(trace, args.output)
    log.info("wrote %d rounds to %s", trace.n_rounds, args.output)
    return EXIT_OK


def _mapping(pairs: list[str] | None) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        canonical, sep, column = pair.partition("=")
        if not sep or not canonical or not column:
            raise ConfigurationError("map", f"expected CANONICAL=COLUMN, got {pair!r}")
        out[canonical] = column
    return out


def cmd_ingest(args) -> int:
    trace = ingest_trace(args.trace, _mapping(args.map))
    summary = {
        "parties": list(trace.parties),
        "rounds": trace.n_rounds,
        "dropped_rounds": trace.dropped_rounds,
    }
    if args.output:
        export_trace(trace, args.output)
        summary["written"] = str(args.output)
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _config(args)
    trace = ingest_trace(args.trace, _mapping(args.map))
    cell = analyze_trace(trace, config, CellResult("trace", 0.0, 0))
    report = {
        "raw": cell.raw.to_dict(),
        "unsuitable": cell.unsuitable,
        "z0": cell.filter_choice.z0,
        "general": cell.general.to_dict(),
        "worst": cell.worst.to_dict(),
        "mwa_intact_ratio": {str(w): r.r_ck for w, r in cell.mwa.items()},
        "kdr": cell.kdr,
        "randomness": cell.randomness.to_table(),
    }
    _write_or_print(_dump(report), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    result = run_sweep(config, jobs=args.jobs)
    emit_reports(result, config.output_dir)
    for cell in result.failed:
        log.error("cell %s r=%g seed=%d failed: %s", cell.scenario, cell.r_lambda, cell.seed, cell.error)
    log.info("%d cells, %d failed, reports in %s", len(result.cells), len(result.failed), config.output_dir)
    return EXIT_FAILED if result.failed else EXIT_OK


def cmd_randomness(args) -> int:
    keys = read_keys(args.keys)
    if not keys:
        raise ParameterError(f"{args.keys}: no keys found")
    reports = [run_suite(k).to_table() for k in keys]
    _write_or_print(_dump(reports[0] if len(reports) == 1 else reports), args.output)
    return EXIT_OK


def cmd_export(args) -> int:
    config = _config(args)
    trace = ingest_trace(args.trace, _mapping(args.map))
    alice, bob = trace.alice, trace.bob
    if not args.raw:
        alice, bob, _ = negotiate_filter(alice, bob, config.z_max, config.bin_db)
    seqs = {"alice": alice, "bob": bob}
    parties = ["alice", "bob"] if args.party == "both" else [args.party]
    keys = [generate_key(seqs[p], config.key_length, p) for p in parties]
    write_keys(keys, args.output, fmt=args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorakey", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one probing trace and write it as CSV")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scenario", default="Id", help=f"one of {', '.join(SCENARIOS)}")
    p.add_argument("--r-lambda", type=float, default=3.0, help="Eve ring radius in wavelengths")
    p.add_argument("-o", "--output", type=Path, required=True)
    _add_config_flags(p, skip=("seeds", "scenarios", "r_lambdas"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="validate a measured trace CSV")
    p.add_argument("trace", type=Path)
    p.add_argument("--map", action="append", metavar="CANONICAL=COLUMN")
    p.add_argument("-o", "--output", type=Path, help="re-export in canonical column layout")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="attack, capacity, filtering and KDR for one trace")
    p.add_argument("trace", type=Path)
    p.add_argument("--map", action="append", metavar="CANONICAL=COLUMN")
    p.add_argument("-o", "--output", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="run a scenario x r x seed grid and write reports")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("randomness", help="run the nine randomness tests on ASCII key lines")
    p.add_argument("keys", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_randomness)

    p = sub.add_parser("export", help="derive keys from a trace and write them")
    p.add_argument("trace", type=Path)
    p.add_argument("--party", choices=("alice", "bob", "both"), default="bob")
    p.add_argument("--raw", action="store_true", help="skip the large-scale filter")
    p.add_argument("--format", choices=("ascii", "hex"), default="ascii")
    p.add_argument("--map", action="append", metavar="CANONICAL=COLUMN")
    p.add_argument("-o", "--output", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (LoraKeyError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
