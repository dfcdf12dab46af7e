import argparse
import logging
import sys
from typing import Optional

from qwork import __version__
from qwork.config import EXPERIMENTS, FORMATS, ConfigError, load_config, parse_overrides
from qwork.errors import QuantumWorkError
from qwork.experiments import run_experiment
from qwork.records import emit

log = logging.getLogger("qwork")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwork",
        description="Run a quantum work experiment and emit its result record.",
        epilog="Any further --key value pair overrides the matching config parameter "
               "(dotted keys reach into grids, e.g. --grid.n_points 1024).",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS, help="Experiment to run")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--out", help="Output path (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, default=None, help="Output format (default: json)")
    parser.add_argument("--n-workers", type=int, default=1, help="Worker actors for Monte-Carlo trials")
    parser.add_argument("--version", action="version", version=f"qwork {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging and progress bars")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s [%(name)s] %(message)s', datefmt='%H:%M:%S',
                        stream=sys.stderr, force=True)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        overrides = parse_overrides(extra)
        config = load_config(args.config, overrides, experiment=args.experiment,
                             output=args.out, fmt=args.format)
        record = run_experiment(config, n_workers=max(1, args.n_workers), progress=args.verbose)
    except ConfigError as e:
        log.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except QuantumWorkError as e:
        log.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL

    try:
        emit(record, config.format, config.output)
    except OSError as e:
        log.error(f"Cannot write output: {e}")
        return EXIT_IO
    return EXIT_OK
