"""
Experiment harness: simulate, train, evaluate and summarize.

Seeds are derived deterministically from the experiment seed, the phase
(training or evaluation), the behavior index and the run index, so training
and evaluation runs never share a seed and every run can be regenerated on
its own.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import (
    DEFAULT_NODE_BUDGET,
    ExperimentConfig,
    FilterConfig,
    QuantizerConfig,
    RunConfig,
    TrainConfig,
)
from .errors import ConfigurationError, StorageError, TrainingDataError
from .hmm import TrainResult, baum_welch_train, left_to_right_init
from .models import BehaviorModel, ObservationSequence
from .normalizer import build_normalizer_table
from .perception import track_positions
from .recognizer import BehaviorSet
from .simulator import SimRun, draw_run_config, get_template, simulate_behavior
from .storage import read_sim_run, write_behavior_file, write_sim_run

logger = logging.getLogger(__name__)

TRAIN_PHASE = 0
EVAL_PHASE = 1
PHASE_STRIDE = 1_000_000
BEHAVIOR_STRIDE = 10_000
LOCK_IN_THRESHOLD = 0.40
EARLY_LOCK_IN = 0.25
BIN_WIDTH = 0.05
TRAINING_DIRECTIONS = ("ccw", "cw")


def run_seed(master_seed: int, phase: int, behavior_index: int, run_index: int) -> int:
    """Seed of one run; distinct for every (phase, behavior, run) triple."""
    if not 0 <= run_index < BEHAVIOR_STRIDE:
        raise ConfigurationError(f"run_index must lie in [0, {BEHAVIOR_STRIDE}).")
    return master_seed + phase * PHASE_STRIDE + behavior_index * BEHAVIOR_STRIDE + run_index


def base_run_config(position_noise_sigma: float = 0.05) -> RunConfig:
    return RunConfig(position_noise_sigma=position_noise_sigma)


def simulate_runs(
    behavior: str,
    count: int,
    seed: int,
    out_dir: Optional[Path] = None,
    position_noise_sigma: float = 0.05,
) -> List[SimRun]:
    """
    Simulate `count` randomized executions with seeds seed, seed + 1, ...

    If out_dir is given, each run is also written to out_dir/run_<i>.
    """
    template = get_template(behavior)
    if count < 1:
        raise ConfigurationError("count must be at least 1.")
    base = base_run_config(position_noise_sigma)
    runs = []
    for i in range(count):
        run = simulate_behavior(template.name, draw_run_config(seed + i, base))
        runs.append(run)
        if out_dir is not None:
            write_sim_run(Path(out_dir) / f"run_{i:04d}", run)
    logger.info("Simulated %d '%s' runs (seeds %d..%d)", count, behavior, seed, seed + count - 1)
    return runs


def perceive(
    run: SimRun,
    filter_config: Optional[FilterConfig] = None,
    quantizer_config: Optional[QuantizerConfig] = None,
) -> ObservationSequence:
    events = track_positions(run.measurements, filter_config, quantizer_config)
    return ObservationSequence.from_events(events, label=run.config.direction)


def training_sequences(
    runs: Sequence[SimRun],
    filter_config: Optional[FilterConfig] = None,
    quantizer_config: Optional[QuantizerConfig] = None,
) -> List[ObservationSequence]:
    """Perceive every run; a run without events is an error naming that run."""
    sequences = []
    for run in runs:
        seq = perceive(run, filter_config, quantizer_config)
        if not len(seq):
            raise TrainingDataError(
                f"Run of '{run.behavior}' with seed {run.config.seed} produced no observation events."
            )
        sequences.append(seq)
    return sequences


def train_behavior(
    name: str,
    sequences: Sequence[ObservationSequence],
    n_symbols: int = 8,
    states: Optional[int] = None,
    train_config: Optional[TrainConfig] = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> Tuple[BehaviorModel, TrainResult]:
    """
    Train one behavior model with two left-to-right chains and build its normalizer.

    Sequences labelled "ccw" seed the first chain's emissions and those
    labelled "cw" the second. Each chain has `states` states, by default the
    template's turn count, which is also the nominal length T.
    """
    train_config = train_config or TrainConfig()
    t_nominal = get_template(name).n_events
    chain_length = t_nominal if states is None else states
    if chain_length < 1:
        raise ConfigurationError("states must be a positive integer.")
    if not sequences:
        raise TrainingDataError(f"No training sequences for '{name}'.")

    by_direction = [
        [s for s in sequences if s.label == "ccw"],
        [s for s in sequences if s.label == "cw"],
    ]
    init = left_to_right_init(
        n_states=2 * chain_length,
        n_symbols=n_symbols,
        seed=train_config.seed,
        n_chains=2,
        seed_sequences=by_direction,
        name=name,
    )
    result = baum_welch_train(sequences, init, train_config)
    table = build_normalizer_table(result.model, t_nominal, node_budget)
    behavior = BehaviorModel(name=name, hmm=result.model, t_nominal=t_nominal, normalizer=table)
    return behavior, result


def train_from_run_dirs(
    name: str,
    run_dirs: Sequence[Path],
    states: Optional[int] = None,
    quantizer_config: Optional[QuantizerConfig] = None,
    filter_config: Optional[FilterConfig] = None,
    train_config: Optional[TrainConfig] = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> Tuple[BehaviorModel, TrainResult]:
    if not run_dirs:
        raise TrainingDataError(f"No run directories to train '{name}' from.")
    quantizer_config = quantizer_config or QuantizerConfig()
    runs = [read_sim_run(path) for path in run_dirs]
    sequences = []
    for path, run in zip(run_dirs, runs):
        seq = perceive(run, filter_config, quantizer_config)
        if not len(seq):
            raise TrainingDataError(f"Run {path} produced no observation events.")
        sequences.append(seq)
    return train_behavior(name, sequences, quantizer_config.n_bins, states, train_config, node_budget)


@dataclass
class EvalRecord:
    """Scores for one observation event of one evaluation run."""
    true_behavior: str
    run: int
    seed: int
    direction: str
    scale: float
    t_event: int
    time: float
    percent_executed: float
    likelihoods: Dict[str, float] = field(default_factory=dict)
    argmax: str = ""

    def to_row(self) -> Dict[str, Any]:
        row = {
            "true_behavior": self.true_behavior,
            "run": self.run,
            "seed": self.seed,
            "direction": self.direction,
            "scale": self.scale,
            "t_event": self.t_event,
            "time": self.time,
            "percent_executed": self.percent_executed,
            "argmax": self.argmax,
        }
        for name, value in self.likelihoods.items():
            row[f"L_{name}"] = value
        return row


def evaluate_run(
    behavior_set: BehaviorSet,
    run: SimRun,
    run_index: int,
    filter_config: Optional[FilterConfig] = None,
    quantizer_config: Optional[QuantizerConfig] = None,
) -> List[EvalRecord]:
    """Recognize one run online and record the scores after every event."""
    session = behavior_set.new_session()
    records = []
    for event in track_positions(run.measurements, filter_config, quantizer_config):
        report = session.step(event)
        records.append(EvalRecord(
            true_behavior=run.behavior,
            run=run_index,
            seed=run.config.seed,
            direction=run.config.direction,
            scale=run.config.scale,
            t_event=report.t,
            time=report.timestamp,
            percent_executed=run.percent_executed(report.timestamp),
            likelihoods=report.likelihood_map(),
            argmax=report.argmax_behavior,
        ))
    if not records:
        logger.warning("Run %d of '%s' (seed %d) produced no events", run_index, run.behavior, run.config.seed)
    return records


def _evaluate_task(args) -> List[EvalRecord]:
    behaviors, node_budget, name, run_index, run_config, filter_config, quantizer_config = args
    run = simulate_behavior(name, run_config, quantizer_config.n_bins)
    return evaluate_run(BehaviorSet(behaviors, node_budget), run, run_index, filter_config, quantizer_config)


def evaluate(behavior_set: BehaviorSet, config: ExperimentConfig) -> pd.DataFrame:
    """
    Simulate and recognize runs_per_behavior fresh runs of every behavior.

    Rows are ordered by (behavior, run index, event) whatever the worker count.
    """
    base = base_run_config(config.position_noise_sigma)
    tasks = []
    for behavior_index, name in enumerate(config.behaviors):
        for run_index in range(config.runs_per_behavior):
            seed = run_seed(config.seed, EVAL_PHASE, behavior_index, run_index)
            tasks.append((behavior_set.behaviors, behavior_set.node_budget, name, run_index,
                          draw_run_config(seed, base), config.filter, config.quantizer))

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate_task, tasks))
    else:
        results = [_evaluate_task(task) for task in tasks]

    rows = [record.to_row() for records in results for record in records]
    columns = ["true_behavior", "run", "seed", "direction", "scale", "t_event", "time",
               "percent_executed", "argmax"] + [f"L_{name}" for name in behavior_set.names]
    return pd.DataFrame(rows, columns=columns)


def _lock_in(run_rows: pd.DataFrame, true_behavior: str) -> Optional[float]:
    """Smallest percent_executed from which the true behavior stays the argmax."""
    hits = (run_rows["argmax"] == true_behavior).to_numpy()
    if not hits.size or not hits[-1]:
        return None
    misses = np.flatnonzero(~hits)
    first = int(misses[-1]) + 1 if misses.size else 0
    return float(run_rows["percent_executed"].iloc[first])


def summarize(records: pd.DataFrame, config: ExperimentConfig) -> Dict[str, Any]:
    """
    Per-behavior lock-in statistics, first-event hit rate and binned L curves.

    A run that never settles on its true behavior counts as locking in at 1.0
    in the mean and worst-case figures.
    """
    names = sorted(c[2:] for c in records.columns if c.startswith("L_"))
    edges = np.arange(0.0, 1.0 + BIN_WIDTH / 2, BIN_WIDTH)
    per_behavior: Dict[str, Any] = {}
    locked_runs = 0
    total_runs = 0

    for behavior in config.behaviors:
        rows = records[records["true_behavior"] == behavior]
        lock_ins: List[Optional[float]] = []
        first_hits = 0
        for run_index in range(config.runs_per_behavior):
            run_rows = rows[rows["run"] == run_index].sort_values("t_event")
            lock_in = _lock_in(run_rows, behavior)
            lock_ins.append(lock_in)
            if len(run_rows) and run_rows["argmax"].iloc[0] == behavior:
                first_hits += 1
            if lock_in is not None and lock_in <= LOCK_IN_THRESHOLD:
                locked_runs += 1
            total_runs += 1

        effective = [1.0 if v is None else v for v in lock_ins]
        bins = pd.cut(rows["percent_executed"], edges, include_lowest=True)
        curves = rows.groupby(bins, observed=False)[[f"L_{n}" for n in names]].mean()
        per_behavior[behavior] = {
            "runs": config.runs_per_behavior,
            "first_event_fraction": first_hits / config.runs_per_behavior,
            "lock_in": lock_ins,
            "lock_in_mean": float(np.mean(effective)),
            "lock_in_worst": float(np.max(effective)),
            "never_locked": sum(v is None for v in lock_ins),
            "curve": {
                "bin_upper_edges": [round(float(e), 10) for e in edges[1:]],
                "mean_L": {
                    n: [None if math.isnan(v) else float(v) for v in curves[f"L_{n}"]] for n in names
                },
            },
        }

    return {
        "behaviors": per_behavior,
        "overall": {
            "runs": total_runs,
            "locked_by_40pct_fraction": locked_runs / total_runs if total_runs else 0.0,
            "behaviors_mean_lock_in_le_25pct": sum(
                1 for s in per_behavior.values() if s["lock_in_mean"] <= EARLY_LOCK_IN
            ),
            "behaviors_first_event_majority": sum(
                1 for s in per_behavior.values() if s["first_event_fraction"] > 0.5
            ),
        },
        "bin_width": BIN_WIDTH,
        "config": config.to_dict(),
    }


def write_results(records: pd.DataFrame, summary: Dict[str, Any], output_dir: Path) -> None:
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        records.to_csv(output_dir / "eval.csv", index=False)
        with open(output_dir / "summary.json", "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise StorageError(f"Cannot write results to {output_dir}: {e}")
    logger.info("Wrote %d records to %s", len(records), output_dir / "eval.csv")


def run_evaluation(behavior_set: BehaviorSet, config: ExperimentConfig) -> Dict[str, Any]:
    records = evaluate(behavior_set, config)
    summary = summarize(records, config)
    write_results(records, summary, Path(config.output_dir))
    return summary


def training_run_config(seed: int, run_index: int, base: Optional[RunConfig] = None) -> RunConfig:
    """Randomized run config whose direction alternates ccw, cw, ccw, ..."""
    return replace(draw_run_config(seed, base), direction=TRAINING_DIRECTIONS[run_index % 2])


def train_all(config: ExperimentConfig) -> List[BehaviorModel]:
    """Simulate training runs for every behavior, train and save the models."""
    base = base_run_config(config.position_noise_sigma)
    behaviors = []
    for behavior_index, name in enumerate(config.behaviors):
        runs = [
            simulate_behavior(
                name,
                training_run_config(run_seed(config.seed, TRAIN_PHASE, behavior_index, i), i, base),
                config.quantizer.n_bins,
            )
            for i in range(config.training_runs_per_behavior)
        ]
        sequences = training_sequences(runs, config.filter, config.quantizer)
        train_config = replace(config.train, seed=config.train.seed + behavior_index)
        behavior, _ = train_behavior(
            name, sequences, config.quantizer.n_bins, config.states, train_config, config.node_budget
        )
        write_behavior_file(config.resolved_models_dir / f"{name}.json", behavior)
        behaviors.append(behavior)
    return behaviors


def reproduce(config: ExperimentConfig) -> Dict[str, Any]:
    """Train every behavior from scratch, then evaluate the resulting set."""
    behaviors = train_all(config)
    return run_evaluation(BehaviorSet(behaviors, config.node_budget), config)
