"""
pdpolar command line.

  pdpolar analyze --config <path> [--out <dir>]
  pdpolar sweep   --config <path> --out <dir>
  pdpolar verify  [--quick]

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

import os
import sys
import json
import math
import argparse

from config import ConfigError, load_config
from pipeline import CSV_COLUMNS, CURVE_COLUMNS, emit_csv, run_analyze, run_sweep
from logger import get_logger

log = get_logger("cli")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _print_json(payload, stream=None, indent=2):
    print(json.dumps(_jsonable(payload), indent=indent), file=stream or sys.stdout)


def _fail(message, code):
    print(f"pdpolar: {message}", file=sys.stderr)
    return code


def _prepare_out(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e.strerror}") from e


def cmd_analyze(args):
    try:
        config = load_config(args.config)
    except ConfigError as e:
        return _fail(str(e), EXIT_CONFIG)

    if config.sweep is not None:
        log.warning("analyze ignores the sweep section; use 'pdpolar sweep'")

    result = run_analyze(config)
    if "error" in result:
        return _fail(f"{result['module']}: {result['error']}", EXIT_RUNTIME)

    out_dir = args.out or config.output.dir
    path = os.path.join(out_dir, "analyze.csv")
    try:
        _prepare_out(out_dir)
        emit_csv([result["row"]], path, CSV_COLUMNS)
    except OSError as e:
        return _fail(f"cannot write {path}: {e}", EXIT_RUNTIME)

    _print_json({**result, "csv": path})
    return EXIT_OK


def cmd_sweep(args):
    try:
        config = load_config(args.config)
    except ConfigError as e:
        return _fail(str(e), EXIT_CONFIG)

    if config.sweep is None:
        return _fail("invalid config: sweep: section required for 'pdpolar sweep'", EXIT_CONFIG)

    result = run_sweep(config, workers=args.workers)
    if "error" in result:
        cell = f" (cell {result['cell']})" if result.get("cell") else ""
        return _fail(f"{result['error']}{cell}", EXIT_RUNTIME)

    paths = {
        "sweep": os.path.join(args.out, "sweep.csv"),
        "ber_curve": os.path.join(args.out, "ber_curve.csv"),
    }
    try:
        _prepare_out(args.out)
        emit_csv(result["rows"], paths["sweep"], CSV_COLUMNS)
        emit_csv(result["curve"], paths["ber_curve"], CURVE_COLUMNS)
    except OSError as e:
        return _fail(f"cannot write sweep output: {e}", EXIT_RUNTIME)

    _print_json({"rows": len(result["rows"]), "curve_points": len(result["curve"]), **paths})
    return EXIT_OK


def cmd_verify(args):
    from verify import run_checks

    all_passed = True
    for check in run_checks(quick=args.quick):
        all_passed &= check["passed"]
        print(json.dumps(_jsonable(check)), flush=True)
    return EXIT_OK if all_passed else EXIT_RUNTIME


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pdpolar",
        description="Polar codes for partially degradable quantum channels: set algebra, rates and BER bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="Analyze one channel at one code length")
    p_analyze.add_argument("--config", required=True, help="JSON run config")
    p_analyze.add_argument("--out", default=None, help="Output directory (default: output.dir)")
    p_analyze.set_defaults(func=cmd_analyze)

    p_sweep = sub.add_parser("sweep", help="Sweep k_list x param_grid and write CSVs")
    p_sweep.add_argument("--config", required=True, help="JSON run config with a sweep section")
    p_sweep.add_argument("--out", required=True, help="Output directory")
    p_sweep.add_argument("--workers", type=int, default=None, help="Thread pool size (default: PDPOLAR_WORKERS)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="Run the invariant suite")
    p_verify.add_argument("--quick", action="store_true", help="Reduced iteration counts")
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
