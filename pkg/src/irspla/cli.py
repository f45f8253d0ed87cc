"""Command-line interface: ``irspla {generate,run,sweep,report,verify}``.

Exit codes: 0 on success, 1 on invalid input (configuration, arguments,
missing results), 2 when a run finished with failures or a check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .acquisition import STRATEGY_NAMES
from .config import SWEEP_KINDS, ExperimentConfig, SweepSpec, apply_overrides, default_config, load_config
from .errors import IrsplaError, MissingSweep
from .experiment import conditions, load_or_generate, run_experiment, stream_seed
from .report import FIGURE_SWEEPS, FIGURES, emit_plot_data, load_results, render_summary
from .verify import run_checks

logger = logging.getLogger("irspla")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_DATEFMT = "%H:%M:%S"


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=LOG_DATEFMT, force=True)


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", type=Path, help="YAML experiment configuration (defaults if omitted)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--runs", type=int, help="independent runs per condition")
    parser.add_argument("--strategies", nargs="+", choices=STRATEGY_NAMES, help="strategies to compare")
    parser.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    """The argument parser."""
    parser = argparse.ArgumentParser(prog="irspla", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    verbs = parser.add_subparsers(dest="verb", required=True)

    generate = verbs.add_parser("generate", help="generate the datasets of one run")
    _add_overrides(generate)
    generate.add_argument("--run", type=int, default=0, help="run index (default 0)")

    run = verbs.add_parser("run", help="run an experiment")
    _add_overrides(run)

    sweep = verbs.add_parser("sweep", help="run an experiment over a sweep dimension")
    _add_overrides(sweep)
    sweep.add_argument("--kind", choices=[k for k in SWEEP_KINDS if k != "none"], required=True)
    sweep.add_argument("--values", nargs="*", type=float, default=[], help="sweep points")

    report = verbs.add_parser("report", help="write figure tables from experiment results")
    report.add_argument("results", type=Path, help="experiment output directory")
    report.add_argument("--figures", nargs="+", choices=FIGURES, help="figures (default: all the results support)")

    verify = verbs.add_parser("verify", help="check the library against independent oracles")
    verify.add_argument("--full", action="store_true", help="use the large sample sizes")
    verify.add_argument("--seed", type=int, default=0)
    return parser


def _config(args: argparse.Namespace, sweep: SweepSpec | None = None) -> ExperimentConfig:
    config = load_config(args.config) if args.config is not None else default_config()
    return apply_overrides(
        config, seed=args.seed, runs=args.runs, strategies=args.strategies, out=args.out, sweep=sweep
    )


def _generate(args: argparse.Namespace) -> int:
    config = _config(args)
    exp = config["experiment"]
    seed = stream_seed(config.seed, args.run, 0)
    for condition in conditions(config):
        dataset = load_or_generate(
            condition.scenario, exp["per_class_train"], exp["per_class_test"], seed, config.out / "cache"
        )
        print(f"{condition.label}: {dataset.scenario_hash[:16]} ({dataset.train_y.size} train, {dataset.test_y.size} test)")
    return EXIT_OK


def _experiment(config: ExperimentConfig) -> int:
    result = run_experiment(config)
    print(render_summary(result.curves))
    if result.failures:
        logger.error("%d failures, see %s", len(result.failures), config.out / "failures.json")
        return EXIT_FAILED
    return EXIT_OK


def _report(args: argparse.Namespace) -> int:
    header, curves, timings = load_results(args.results)
    sweep = header.get("sweep", "none")
    figures = args.figures or [f for f in FIGURES if FIGURE_SWEEPS.get(f, sweep) == sweep]
    for which in figures:
        path = emit_plot_data(curves, timings, which, sweep, args.results, {"config_hash": header.get("config_hash")})
        print(path)
    return EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    results = run_checks(full=args.full, seed=args.seed)
    for result in results:
        print(result)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        if args.verb == "generate":
            return _generate(args)
        if args.verb == "run":
            return _experiment(_config(args))
        if args.verb == "sweep":
            return _experiment(_config(args, SweepSpec(args.kind, tuple(args.values))))
        if args.verb == "report":
            return _report(args)
        return _verify(args)
    except (MissingSweep, FileNotFoundError) as err:
        print(f"irspla: {err}", file=sys.stderr)
        return EXIT_INVALID
    except IrsplaError as err:
        print(f"irspla: {err}", file=sys.stderr)
        return EXIT_INVALID if isinstance(err, ValueError) else EXIT_FAILED
