"""Command-line entry point for EUREKA experiments."""

from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging

from .config import load_config
from .const import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_JUDGE_ERROR,
    EXIT_OK,
    METHOD_ACTIVE,
    METHOD_DIRECT,
    METHOD_PAIRWISE,
)
from .exceptions import (
    CacheError,
    ConfigError,
    DataError,
    JudgeError,
    ModelError,
)
from .runner import ExperimentRunner
from .version import __version__

_LOGGER = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment."""
    parser = argparse.ArgumentParser(
        prog="eureka",
        description="Rank features by interestingness and fit top-K classifiers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--config", required=True, help="Run configuration (.toml or .json)"
    )
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--out", help="Override the output root directory")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Enable debug logging"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    rank = commands.add_parser("rank", help="Rank features with the judge")
    rank.add_argument(
        "--method",
        choices=[METHOD_PAIRWISE, METHOD_ACTIVE, METHOD_DIRECT],
        help="Ranking method (default from config)",
    )
    rank.add_argument(
        "--symmetrize",
        action="store_true",
        default=None,
        help="Query both presentation orders of every pair",
    )

    sweep = commands.add_parser("sweep", help="Accuracy and significance per top-K")
    sweep.add_argument("--ranking", required=True, help="ranking.json to sweep")

    baselines = commands.add_parser(
        "baselines", help="Compare accuracy-first rankers with the ranking"
    )
    baselines.add_argument("--ranking", help="ranking.json for the EUREKA column")

    commands.add_parser("rankbench", help="MAE-versus-N curves of Borda estimators")

    stability = commands.add_parser(
        "stability", help="Rank correlations between repeated rankings"
    )
    stability.add_argument(
        "--rank-method",
        choices=[METHOD_PAIRWISE, METHOD_DIRECT],
        default=METHOD_PAIRWISE,
        help="How each repeated ranking is produced",
    )
    return parser


def _dispatch(runner: ExperimentRunner, args: argparse.Namespace) -> None:
    if args.command == "rank":
        runner.run_rank(method=args.method, symmetrize=args.symmetrize)
    elif args.command == "sweep":
        report = runner.run_sweep(args.ranking)
        print(f"K' = {report.K_prime} (chance rate {report.chance_rate:.4f})")
    elif args.command == "baselines":
        runner.run_baselines(args.ranking)
    elif args.command == "rankbench":
        runner.run_rankbench()
    elif args.command == "stability":
        result = runner.run_stability(args.rank_method)
        summary = result.summary()
        print(
            "kendall tau {mean:.4f} ± {std:.4f}".format(**summary["kendall_tau"])
        )
    print(runner.run_dir)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    runner = None
    try:
        config = load_config(args.config).with_overrides(args.seed, args.out)
        runner = ExperimentRunner(config)
        _dispatch(runner, args)
    except ConfigError as err:
        _LOGGER.error("Configuration error: %s", err)
        return EXIT_CONFIG_ERROR
    except (DataError, ModelError) as err:
        _LOGGER.error("Data error: %s", err)
        return EXIT_DATA_ERROR
    except (JudgeError, CacheError) as err:
        _LOGGER.error("Judge error: %s", err)
        return EXIT_JUDGE_ERROR
    except ValueError as err:
        _LOGGER.error("Invalid input: %s", err)
        return EXIT_DATA_ERROR
    finally:
        if runner is not None:
            runner.close()
    return EXIT_OK
