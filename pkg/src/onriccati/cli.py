"""
Command-line interface for onriccati.
"""

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from typing import List, Optional

import numpy as np

from . import __version__
from .bench import probe_boundedness, run_experiment, run_trials
from .config import EXPERIMENT_KINDS, ExperimentConfig, dump_config, load_config
from .errors import (
    ConfigError,
    InvariantViolationError,
    NotStabilizableError,
    OnriccatiError,
    ResetDivergenceError,
    UnstableClosedLoopError,
)
from .formatters import ConsoleFormatter
from .riccati import DareProblem, solve_dare
from .utils import read_matrices, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_STABILIZABLE = 2
EXIT_INVARIANT = 3

ONLINE_COLUMNS = [
    "t",
    "cost_online",
    "cost_comparator",
    "regret_cum",
    "dP_norm",
    "dK_norm",
    "rho_closed_loop",
    "pmax_eig",
]
ALGORITHM_COLUMNS = [
    "trial",
    "t",
    "cost",
    "cost_comparator",
    "regret_cum",
    "rho_closed_loop",
    "pmax_eig",
]
SUMMARY_COLUMNS = [
    "algorithm",
    "final_regret",
    "average_regret",
    "max_rho",
    "max_pmax",
    "failed",
]


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="onriccati",
        description=(
            "Online Riccati update for linear-quadratic control with changing costs"
        ),
    )

    parser.add_argument(
        "--version", action="version", version=f"onriccati v{__version__}"
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Enable verbose logging output"
    )
    parser.add_argument(
        "--log-file",
        type=str,
        help="Write log records to this file instead of stderr"
    )

    # Options shared by the experiment commands
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Path to a YAML configuration file")
    common.add_argument("--seed", type=int, help="Unsigned 64-bit seed")
    common.add_argument("--out", type=str, help="Output path")
    common.add_argument(
        "--experiment", type=str, help="Cost stream preset: 1, 2, 3 or constant"
    )
    common.add_argument("--horizon", type=int, help="Number of rounds T")
    common.add_argument("--dims", type=str, help="State and input dimensions as n,m")
    common.add_argument("--trials", type=int, help="Number of independent trials")
    common.add_argument(
        "--dump-config",
        action="store_true",
        help="Print the effective configuration and exit"
    )

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    solve_parser = subparsers.add_parser(
        "solve-dare", help="Solve a DARE given A, B, Q, R in one matrix file"
    )
    solve_parser.add_argument("file", help="Matrix file holding A, B, Q and R")

    subparsers.add_parser(
        "run-online",
        parents=[common],
        help="Run the online update and write a per-round CSV",
    )
    subparsers.add_parser(
        "bench",
        parents=[common],
        help="Compare the online update with the per-round baselines",
    )
    subparsers.add_parser(
        "probe-bounds",
        parents=[common],
        help="Track lambda_max(P_t) over random trials",
    )

    return parser


def _parse_dims(text: str):
    try:
        n, m = (int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"--dims expects n,m, got {text!r}")
    return n, m


def build_config(parsed_args) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    config = load_config(parsed_args.config)
    overrides = {
        "experiment.seed": parsed_args.seed,
        "experiment.horizon": parsed_args.horizon,
        "experiment.trials": parsed_args.trials,
    }
    if parsed_args.experiment is not None:
        if parsed_args.experiment not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"unknown experiment {parsed_args.experiment!r}; "
                f"expected one of {', '.join(EXPERIMENT_KINDS)}"
            )
        overrides["costs.kind"] = EXPERIMENT_KINDS[parsed_args.experiment]
    if parsed_args.dims is not None:
        overrides["system.n"], overrides["system.m"] = _parse_dims(parsed_args.dims)
    return config.with_overrides(**overrides)


@contextmanager
def _output(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def cmd_solve_dare(parsed_args) -> int:
    A, B, Q, R = read_matrices(parsed_args.file, count=4)
    solution = solve_dare(DareProblem(A, B, Q, R))
    print(ConsoleFormatter.format_dare_solution(solution))
    return EXIT_OK


def _online_rows(ledger):
    state = ledger.online_state
    regret = ledger.regret["online"]
    for idx, record in enumerate(state.diagnostics):
        yield [
            record.t,
            float(ledger.stage_costs["online"][idx]),
            float(ledger.comparator_costs[idx]),
            float(regret[idx]),
            record.dP_norm,
            record.dK_norm,
            record.rho_closed_loop,
            record.pmax_eig,
        ]


def cmd_run_online(config: ExperimentConfig, out: Optional[str]) -> int:
    config.experiment.algorithms = ["online"]
    ledger = run_experiment(config)
    if "online" in ledger.failures:
        print(f"Error: {ledger.failures['online']}", file=sys.stderr)
        return EXIT_INVARIANT
    with _output(out) as stream:
        write_csv(stream, ONLINE_COLUMNS, _online_rows(ledger))
    summary = ConsoleFormatter.format_summary(ledger.summary(), ledger.horizon)
    print(summary, file=sys.stdout if out is not None else sys.stderr)
    return EXIT_OK


def cmd_bench(config: ExperimentConfig, out: Optional[str]) -> int:
    ledgers = run_trials(config)
    for trial, ledger in enumerate(ledgers):
        print(f"trial {trial}")
        print(ConsoleFormatter.format_summary(ledger.summary(), ledger.horizon))
        print(ConsoleFormatter.format_checkpoints(ledger.checkpoint_regret))

    if out is not None:
        os.makedirs(out, exist_ok=True)
        first = ledgers[0]
        for name in first.algorithms:
            with open(os.path.join(out, f"{name}.csv"), "w", newline="") as f:
                rows = (
                    [
                        trial,
                        t + 1,
                        float(led.stage_costs[name][t]),
                        float(led.comparator_costs[t]),
                        float(led.regret[name][t]),
                        float(led.rho[name][t]),
                        float(led.pmax[name][t]),
                    ]
                    for trial, led in enumerate(ledgers)
                    for t in range(led.horizon)
                )
                write_csv(f, ALGORITHM_COLUMNS, rows)
        if first.online_state is not None and "online" not in first.failures:
            with open(os.path.join(out, "rounds.csv"), "w", newline="") as f:
                extra = [n for n in ("fll", "recent") if n in first.stage_costs]
                rows = (
                    row + [float(first.stage_costs[n][row[0] - 1]) for n in extra]
                    for row in _online_rows(first)
                )
                write_csv(f, ONLINE_COLUMNS + [f"cost_{n}" for n in extra], rows)
        with open(os.path.join(out, "summary.csv"), "w", newline="") as f:
            columns = SUMMARY_COLUMNS
            rows = (
                [trial] + [row[c] for c in columns]
                for trial, led in enumerate(ledgers)
                for row in led.summary()
            )
            write_csv(f, ["trial"] + columns, rows)

    if any("online" in led.failures for led in ledgers):
        return EXIT_INVARIANT
    return EXIT_OK


def _bound_cell(trial) -> float:
    return np.nan if trial.bound is None else trial.bound


def cmd_probe_bounds(config: ExperimentConfig, out: Optional[str]) -> int:
    trials = probe_boundedness(config)
    print(ConsoleFormatter.format_probe(trials))
    if out is not None:
        with open(out, "w", newline="") as f:
            rows = (
                [trial.trial, t, float(value), _bound_cell(trial)]
                for trial in trials
                for t, value in enumerate(trial.series, start=1)
            )
            write_csv(f, ["trial", "t", "pmax_eig", "bound"], rows)
    return EXIT_OK


def main(args: Optional[List[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        args: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 success, 1 input or configuration error, 2 not
        stabilizable, 3 stability invariant violated during an online run
    """
    parser = create_parser()
    parsed_args = parser.parse_args(args)

    # Configure logging
    logging.basicConfig(
        level=logging.DEBUG if parsed_args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        filename=parsed_args.log_file,
    )

    if parsed_args.command is None:
        parser.print_help()
        return EXIT_OK

    try:
        if parsed_args.command == "solve-dare":
            return cmd_solve_dare(parsed_args)

        config = build_config(parsed_args)
        if parsed_args.dump_config:
            with _output(parsed_args.out) as stream:
                stream.write(dump_config(config))
            return EXIT_OK

        if parsed_args.command == "run-online":
            return cmd_run_online(config, parsed_args.out)
        if parsed_args.command == "bench":
            return cmd_bench(config, parsed_args.out)
        if parsed_args.command == "probe-bounds":
            return cmd_probe_bounds(config, parsed_args.out)

    except NotStabilizableError as e:
        logger.error(f"Not stabilizable: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NOT_STABILIZABLE
    except (
        InvariantViolationError,
        UnstableClosedLoopError,
        ResetDivergenceError,
    ) as e:
        logger.error(f"Invariant violated: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OnriccatiError, OSError) as e:
        logger.error(f"{parsed_args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
