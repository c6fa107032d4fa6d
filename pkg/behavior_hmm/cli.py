"""
Command-line front end.

    behavior-hmm simulate  --behavior NAME --count K --seed S --out DIR
    behavior-hmm train     --behavior NAME --runs DIR [--states N] --out FILE
    behavior-hmm recognize --models DIR (--events FILE | --positions FILE) --out FILE
    behavior-hmm eval      --config FILE
    behavior-hmm reproduce --config FILE
    behavior-hmm describe  --models DIR

Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import ExperimentConfig, Settings, TrainConfig
from .errors import (
    BehaviorHmmError,
    ConfigurationError,
    InputFormatError,
    StorageError,
    ValidationError,
)
from .harness import reproduce, run_evaluation, simulate_runs, train_from_run_dirs
from .recognizer import load_behavior_set
from .simulator import get_template
from .sources import EventSource, JsonlEventSource, PositionCsvSource
from .storage import list_run_dirs, report_to_line, write_behavior_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    get_template(args.behavior)
    runs = simulate_runs(args.behavior, args.count, args.seed, Path(args.out), args.noise)
    print(f"Wrote {len(runs)} '{args.behavior}' runs to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    get_template(args.behavior)
    if args.states is not None and args.states < 1:
        raise ConfigurationError(f"--states must be a positive integer, got {args.states}.")
    run_dirs = list_run_dirs(args.runs)
    train_config = TrainConfig(
        max_iterations=args.max_iterations,
        emission_floor=settings.emission_floor if args.floor is None else args.floor,
        seed=args.seed,
    )
    behavior, result = train_from_run_dirs(
        args.behavior, run_dirs, states=args.states, train_config=train_config,
        node_budget=settings.node_budget,
    )
    write_behavior_file(args.out, behavior)

    print(f"Trained '{behavior.name}' on {len(run_dirs)} runs "
          f"({result.iterations} iterations, {'converged' if result.converged else 'iteration limit'})")
    for iteration, value in enumerate(result.trace):
        print(f"  {iteration:4d}  {value:.6f}")
    print(f"Normalizer max log P by length: "
          + ", ".join(f"{v:.4f}" for v in behavior.normalizer.max_log_prob))
    return EXIT_OK


def cmd_recognize(args: argparse.Namespace, settings: Settings) -> int:
    behavior_set = load_behavior_set(args.models, settings.node_budget)
    source: EventSource
    if args.events:
        source = JsonlEventSource(args.events)
    else:
        source = PositionCsvSource(args.positions)

    session = behavior_set.new_session()
    count = 0
    try:
        with open(args.out, "w", encoding="utf-8") as out:
            try:
                for event in source.events():
                    report = session.step(event)
                    out.write(report_to_line(report) + "\n")
                    count += 1
            except InputFormatError:
                raise
            except ValidationError as e:
                raise InputFormatError(str(e), source.position or 0, source.name)
    except OSError as e:
        raise StorageError(f"Cannot write {args.out}: {e}")

    print(f"Wrote {count} reports to {args.out}")
    return EXIT_OK


def _print_summary(summary) -> None:
    overall = summary["overall"]
    print(f"{'behavior':<12} {'first-event':>11} {'lock-in mean':>12} {'worst':>6}")
    for name, stats in summary["behaviors"].items():
        print(f"{name:<12} {stats['first_event_fraction']:>11.2f} "
              f"{stats['lock_in_mean']:>12.2f} {stats['lock_in_worst']:>6.2f}")
    print(f"Runs locked in by 40%: {overall['locked_by_40pct_fraction']:.0%} of {overall['runs']}")
    print(f"Behaviors with mean lock-in <= 25%: {overall['behaviors_mean_lock_in_le_25pct']}")
    print(f"Behaviors locked at the first event in most runs: {overall['behaviors_first_event_majority']}")


def _experiment_config(args: argparse.Namespace, settings: Settings) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config, settings)
    if args.workers is not None:
        config = config.with_overrides(workers=args.workers)
    return config


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    config = _experiment_config(args, settings)
    behavior_set = load_behavior_set(config.resolved_models_dir, config.node_budget)
    summary = run_evaluation(behavior_set, config)
    _print_summary(summary)
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace, settings: Settings) -> int:
    config = _experiment_config(args, settings)
    summary = reproduce(config)
    _print_summary(summary)
    return EXIT_OK


def cmd_describe(args: argparse.Namespace, settings: Settings) -> int:
    behavior_set = load_behavior_set(args.models, settings.node_budget)
    for behavior in behavior_set.behaviors:
        hmm = behavior.hmm
        print(f"{behavior.name}: N={hmm.n_states} M={hmm.n_symbols} T={behavior.t_nominal}")
        for t, (value, witness) in enumerate(
            zip(behavior.normalizer.max_log_prob, behavior.normalizer.argmax_by_length), start=1
        ):
            print(f"  t={t:<3d} max log P={value:.6f}  argmax={list(witness)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="behavior-hmm",
        description="Train HMM behavior models and recognize behaviors online from turn events.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None,
                        help="Logging level (default: BEHAVIOR_HMM_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate randomized runs of one behavior")
    p.add_argument("--behavior", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.05, help="Position noise sigma in meters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="Train one behavior model from simulated runs")
    p.add_argument("--behavior", required=True)
    p.add_argument("--runs", required=True, help="Directory of run directories")
    p.add_argument("--states", type=int, default=None, help="States per chain (default: turn count)")
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--floor", type=float, default=None, help="Emission floor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recognize", help="Recognize behaviors online from an event or position stream")
    p.add_argument("--models", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--events", help="JSON Lines event stream")
    group.add_argument("--positions", help="CSV position stream with header t,x,y")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recognize)

    for name, func, text in (
        ("eval", cmd_eval, "Evaluate saved models on fresh simulated runs"),
        ("reproduce", cmd_reproduce, "Train all behaviors from scratch and evaluate them"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="Experiment config JSON")
        p.add_argument("--workers", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("describe", help="Print behavior models and their normalizer tables")
    p.add_argument("--models", required=True)
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = Settings(log_level=args.log_level)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return args.func(args, settings)
    except (StorageError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except BehaviorHmmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
