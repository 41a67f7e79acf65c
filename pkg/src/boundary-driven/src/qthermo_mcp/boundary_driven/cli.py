"""Command-line entry point.

    boundary-driven run --experiment fig2_sweep --out out/fig2 --override h_L_points=13
    boundary-driven --selftest

Exit codes: 0 success, 2 invalid config, 3 numerical contract failure or failed check.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .models import ExperimentResponse
from .runner import ExperimentRunner, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTRACT = 3


def parse_override(text: str) -> Tuple[str, Any]:
    """``key=value`` with the value read as JSON when possible."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ValueError(f"override {text!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundary-driven",
        description="Boundary-driven spin chains: Lindblad limit, collision model and thermodynamics",
    )
    parser.add_argument("--selftest", action="store_true", help="run the invariant suites and exit")
    parser.add_argument("--log-level", default=None, help="logging level (default: QTHERMO_LOG_LEVEL or WARNING)")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", help="fig1, fig2_sweep, twosite, convergence, regime_scan or ri_trace")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--out", help="output directory (default: QTHERMO_OUTPUT_DIR or ./out)")
    run.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE", help="override one config key"
    )
    run.add_argument("--log-level", dest="run_log_level", default=None, help=argparse.SUPPRESS)
    return parser


def exit_code(response: ExperimentResponse) -> int:
    if response.success:
        return EXIT_OK
    return EXIT_CONFIG if response.error_kind == "config" else EXIT_CONTRACT


def _report(response: ExperimentResponse) -> None:
    summary: Dict[str, Any] = {
        "success": response.success,
        "checks": response.checks,
        "artifacts": response.artifacts,
    }
    if response.error:
        summary["error"] = response.error
    print(json.dumps(summary, indent=2))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = getattr(args, "run_log_level", None) or args.log_level or os.getenv("QTHERMO_LOG_LEVEL", "WARNING")
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")

    try:
        runner = ExperimentRunner(output_dir=getattr(args, "out", None))
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.selftest:
        response = runner.selftest()
        _report(response)
        return exit_code(response)

    if args.command != "run":
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    try:
        overrides: List[Tuple[str, Any]] = [parse_override(o) for o in args.override]
        config = load_config(args.config, args.experiment, dict(overrides))
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG

    response = runner.run(config)
    _report(response)
    if not response.success:
        print(f"error: {response.error}", file=sys.stderr)
    return exit_code(response)


if __name__ == "__main__":
    sys.exit(main())
