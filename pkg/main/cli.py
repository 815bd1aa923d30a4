"""
Command-line entry point.

Exit codes: 0 on success, 1 on a usage error, 2 on a runtime error. All
diagnostics go to stderr; command results go to stdout.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from agents.tabular import load_qtable, merge_tables, save_qtable
from agents.transfer import build_transfer
from config.settings import ExperimentConfig, Stage, load_config, with_overrides
from training.deep import evaluate_policy
from training.experiment import run_experiment
from training.tabular import evaluate_qtable
from utils.curves import collisions_in_fraction, compare_runs
from utils.errors import ConfigurationError, WorkbenchError
from utils.metrics import read_metrics

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="staged-rl", description="Staged multi-agent RL workbench")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    seeded = _Parser(add_help=False)
    seeded.add_argument("--config", required=True, type=Path, help="Experiment config file")
    seeded.add_argument("--seed", type=int, help="Run this single seed instead of the config's seeds")
    seeded.add_argument("--progress", action="store_true", default=None, help="Show progress bars")
    seeded.add_argument("--run-id", help="Series name in the metrics file")

    p = sub.add_parser("train-subtask", parents=[seeded], help="Train a sub-task Q-table")
    p.add_argument("--variant", required=True, choices=["goal", "avoid"])
    p.add_argument("--out", required=True, type=Path, help="Output Q-table")
    p.add_argument("--metrics", type=Path, help="Metrics CSV (default from the config)")

    p = sub.add_parser("merge", help="Merge sub-task Q-tables")
    p.add_argument("--inputs", required=True, nargs="+", type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("train-joint", parents=[seeded], help="Q-learning on the joint task")
    p.add_argument("--init", type=Path, help="Starting Q-table (e.g. a merged table)")
    p.add_argument("--frozen", action="store_true", default=None, help="Evaluate --init without learning")
    p.add_argument("--metrics", required=True, type=Path)
    p.add_argument("--out", type=Path, help="Write the final table here")

    p = sub.add_parser("train-vdn", parents=[seeded], help="VDN pretraining of the shared network")
    p.add_argument("--out", required=True, type=Path, help="Output weights")
    p.add_argument("--metrics", required=True, type=Path)

    p = sub.add_parser("train-idql", parents=[seeded], help="Independent deep Q-learning")
    p.add_argument("--init", type=Path, help="Pretrained shared weights to transfer")
    p.add_argument("--metrics", required=True, type=Path)

    p = sub.add_parser("plot", help="SVG learning curves")
    p.add_argument("--inputs", required=True, nargs="+", type=Path)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--title", default="Episode return")

    p = sub.add_parser("eval", help="Greedy rollouts of a table or network")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--qtable", type=Path)
    source.add_argument("--weights", type=Path)
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("compare", help="Episodes-to-threshold and early collisions per run")
    p.add_argument("--inputs", required=True, nargs="+", type=Path)
    p.add_argument("--threshold", required=True, type=float)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--fraction", type=float, default=0.25)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as e:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    _configure_logging(args.verbose)
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except (WorkbenchError, OSError) as e:
        logger.error("%s", e)
        return 2
    return 0


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def _configured(args, allowed: Sequence[Stage], **overrides) -> ExperimentConfig:
    config = load_config(args.config, validate=False)
    stage = overrides.pop("stage", None) or config.stage
    if stage not in allowed:
        raise ConfigurationError(
            f"{args.config} configures stage {config.stage.value}; "
            f"{args.command} expects {' or '.join(s.value for s in allowed)}"
        )
    return with_overrides(
        config, stage=stage, seed=args.seed, progress=args.progress, run_id=args.run_id, **overrides
    )


def _absolute(path: Optional[Path]) -> Optional[str]:
    return str(path.resolve()) if path is not None else None


def _cmd_train_subtask(args) -> None:
    config = _configured(
        args, [Stage.TABULAR_SUBTASK],
        variant=args.variant, artifact=_absolute(args.out), metrics=_absolute(args.metrics),
    )
    run_experiment(config)


def _cmd_merge(args) -> None:
    tables = [load_qtable(path) for path in args.inputs]
    merged = merge_tables(tables)
    save_qtable(merged, args.out)
    logger.info("Merged %d tables (%d states) into %s", len(tables), len(merged), args.out)


def _cmd_train_joint(args) -> None:
    config = _configured(
        args, [Stage.TABULAR_JOINT],
        init=_absolute(args.init), frozen=args.frozen,
        metrics=_absolute(args.metrics), artifact=_absolute(args.out),
    )
    run_experiment(config)


def _cmd_train_vdn(args) -> None:
    config = _configured(
        args, [Stage.VDN_PRETRAIN], artifact=_absolute(args.out), metrics=_absolute(args.metrics),
    )
    run_experiment(config)


def _cmd_train_idql(args) -> None:
    stage = Stage.IDQL_TRANSFER if args.init is not None else None
    config = _configured(
        args, [Stage.IDQL_SCRATCH, Stage.IDQL_TRANSFER],
        stage=stage, init=_absolute(args.init), metrics=_absolute(args.metrics),
    )
    run_experiment(config)


def _cmd_plot(args) -> None:
    # matplotlib is only needed here.
    from utils.plot import emit_plot

    emit_plot(args.inputs, args.window, args.out, title=args.title)


def _cmd_eval(args) -> None:
    if args.episodes < 1:
        raise UsageError("eval: --episodes must be positive")
    config = load_config(args.config, validate=False)
    seed = args.seed if args.seed is not None else config.seeds[0]
    if args.qtable is not None:
        if not config.stage.is_tabular:
            raise ConfigurationError(f"{args.config} is not a tabular config; use --weights")
        summary = evaluate_qtable(load_qtable(args.qtable), config.env.single_config(config.stage, seed), args.episodes)
    else:
        if config.stage.is_tabular:
            raise ConfigurationError(f"{args.config} is a tabular config; use --qtable")
        env_config = config.env.multi_config(config.stage, seed)
        agents = build_transfer(args.weights, env_config, config.env.id_slots)
        summary = evaluate_policy(agents, env_config, args.episodes, config.env.id_slots)
    print(
        f"episodes={summary.episodes} mean_return={summary.mean_return!r} "
        f"collisions={summary.collisions} mean_steps={summary.mean_steps!r}"
    )


def _cmd_compare(args) -> None:
    rows = []
    for path in args.inputs:
        rows.extend(read_metrics(path))
    speed = compare_runs(rows, args.threshold, args.window)
    early = collisions_in_fraction(rows, args.fraction)
    print("run_id\tmedian_episodes_to_threshold\tseeds_reached\tmedian_early_collisions")
    for run_id, result in speed.items():
        median = "never" if result["median"] is None else f"{result['median']:g}"
        print(f"{run_id}\t{median}\t{result['reached']}/{len(result['per_seed'])}\t{early[run_id]:g}")


COMMANDS = {
    "train-subtask": _cmd_train_subtask,
    "merge": _cmd_merge,
    "train-joint": _cmd_train_joint,
    "train-vdn": _cmd_train_vdn,
    "train-idql": _cmd_train_idql,
    "plot": _cmd_plot,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
}


if __name__ == "__main__":
    sys.exit(main())
