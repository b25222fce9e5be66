"""
Command-line entry point: python -m src.rate_scan [flags]

Scans channel loss for each phase count, optimizes the intensities at every
point and writes the table m,loss_db,mu,nu,q_mu,e_mu,i_ae,rate,plob.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from src.scan.config import ConfigError, load_config
from src.scan.runner import mc_output_path, run_scan, summarize_scan, validate_scan, write_table
from src.security.eve_bound import EveBoundError
from src.security.lp_core import LpNumericalError
from src.utils.constants import EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_OK

logger = logging.getLogger(__name__)


def _m_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Scan the twin-field key rate against channel loss.")
    parser.add_argument("--config", default=None, help="YAML config file (default: resources/config.yaml)")
    parser.add_argument("--m-list", type=_m_list, default=None, help="Comma-separated phase counts, e.g. 4,8,12")
    parser.add_argument("--loss-start", type=float, default=None, help="First loss in dB")
    parser.add_argument("--loss-end", type=float, default=None, help="Last loss in dB (inclusive)")
    parser.add_argument("--loss-step", type=float, default=None, help="Loss step in dB")
    parser.add_argument("--dark", type=float, default=None, help="Dark-count probability per pulse")
    parser.add_argument("--det-eff", type=float, default=None, help="Detector efficiency")
    parser.add_argument("--misalign", type=float, default=None, help="Misalignment error fraction")
    parser.add_argument("--f", type=float, default=None, help="Error-correction inefficiency")
    parser.add_argument("--out", default=None, help="Output CSV path")
    parser.add_argument("--seed", type=int, default=None, help="Base seed for Monte Carlo checks")
    parser.add_argument("--validate-mc", action="store_true", default=None, help="Cross-check every row with the Monte Carlo engine")
    parser.add_argument("--mc-trials", type=int, default=None, help="Trials per Monte Carlo check")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes (default: $RATE_SCAN_WORKERS or 1)")
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Map parsed flags onto dotted config keys."""
    return {
        "protocol.m_list": args.m_list,
        "protocol.f": args.f,
        "channel.loss.start": args.loss_start,
        "channel.loss.end": args.loss_end,
        "channel.loss.step": args.loss_step,
        "channel.dark": args.dark,
        "channel.det_eff": args.det_eff,
        "channel.misalign": args.misalign,
        "monte_carlo.validate": args.validate_mc,
        "monte_carlo.trials": args.mc_trials,
        "output.path": args.out,
        "output.seed": args.seed,
        "workers": args.workers,
    }


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config(args.config, overrides_from_args(args))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR

    try:
        table = run_scan(cfg, progress=not args.no_progress)
        write_table(table, cfg.out)
        if cfg.validate_mc:
            write_table(validate_scan(cfg, table, progress=not args.no_progress), mc_output_path(cfg.out))
    except (LpNumericalError, EveBoundError) as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL_FAILURE

    summarize_scan(table)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
