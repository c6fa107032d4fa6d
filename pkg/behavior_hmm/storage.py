"""
File formats: model JSON, event/report JSON Lines, position CSV and
simulated run directories.

Floats are written with Python's shortest round-trip repr (17 significant
digits at most), so a saved model reloads bit-identical.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple, Union

import numpy as np
import pandas as pd

from .config import RunConfig
from .errors import (
    InputFormatError,
    ModelValidationError,
    StorageError,
    ValidationError,
)
from .hmm import require_valid
from .models import BehaviorModel, HmmModel, NormalizerTable, ObservationEvent, RecognitionReport
from .simulator import SimRun, TrueTurnEvent

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _write_json(path: PathLike, data: Dict[str, Any]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, allow_nan=False)
            f.write("\n")
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}")


def _read_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise InputFormatError(f"invalid JSON ({e.msg})", e.lineno, str(path))
    if not isinstance(data, dict):
        raise ValidationError(f"{path} must contain a JSON object.")
    return data


# Models

def model_to_dict(model: HmmModel) -> Dict[str, Any]:
    return {
        "name": model.name,
        "n_states": model.n_states,
        "n_symbols": model.n_symbols,
        "pi": [float(v) for v in model.pi],
        "a": [[float(v) for v in row] for row in model.a],
        "b": [[float(v) for v in row] for row in model.b],
    }


def model_from_dict(data: Dict[str, Any], source: str = "") -> HmmModel:
    """Build and validate a model from its JSON form."""
    missing = [key for key in ("name", "n_states", "n_symbols", "pi", "a", "b") if key not in data]
    if missing:
        raise ModelValidationError(f"Model {source} is missing keys", missing)
    try:
        model = HmmModel(pi=data["pi"], a=data["a"], b=data["b"], name=str(data["name"]))
    except (TypeError, ValueError) as e:
        raise ModelValidationError(f"Model {source} has malformed arrays: {e}")
    if model.n_states != data["n_states"] or model.n_symbols != data["n_symbols"]:
        raise ModelValidationError(
            f"Model {source} declares N={data['n_states']}, M={data['n_symbols']} "
            f"but its arrays give N={model.n_states}, M={model.n_symbols}"
        )
    require_valid(model)
    return model


def write_model_file(path: PathLike, model: HmmModel) -> None:
    _write_json(path, model_to_dict(model))


def read_model_file(path: PathLike) -> HmmModel:
    return model_from_dict(_read_json(path), str(path))


def behavior_to_dict(behavior: BehaviorModel) -> Dict[str, Any]:
    data = model_to_dict(behavior.hmm)
    data["name"] = behavior.name
    data["t_nominal"] = behavior.t_nominal
    data["max_log_prob"] = [float(v) for v in behavior.normalizer.max_log_prob]
    data["argmax_sequence"] = list(behavior.normalizer.argmax_sequence)
    data["argmax_by_length"] = [list(w) for w in behavior.normalizer.argmax_by_length]
    return data


def write_behavior_file(path: PathLike, behavior: BehaviorModel) -> None:
    _write_json(path, behavior_to_dict(behavior))
    logger.info("Wrote behavior '%s' to %s", behavior.name, path)


def read_behavior_file(path: PathLike) -> BehaviorModel:
    """
    Load a behavior model file.

    The embedded HMM is validated; the normalizer witness is checked when the
    behavior joins a BehaviorSet.
    """
    data = _read_json(path)
    hmm = model_from_dict(data, str(path))
    missing = [key for key in ("t_nominal", "max_log_prob", "argmax_sequence") if key not in data]
    if missing:
        raise ModelValidationError(f"Behavior file {path} is missing keys", missing)
    try:
        max_log_prob = tuple(float(v) for v in data["max_log_prob"])
        argmax_sequence = tuple(int(s) for s in data["argmax_sequence"])
        by_length = tuple(tuple(int(s) for s in w) for w in data.get("argmax_by_length", []))
    except (TypeError, ValueError) as e:
        raise ModelValidationError(f"Behavior file {path} has a malformed normalizer: {e}")
    if not max_log_prob:
        raise ModelValidationError(f"Behavior file {path} has an empty normalizer table.")
    if by_length and len(by_length) != len(max_log_prob):
        raise ModelValidationError(f"Behavior file {path} has mismatched normalizer witnesses.")
    normalizer = NormalizerTable(
        model_name=hmm.name,
        max_log_prob=max_log_prob,
        argmax_sequence=argmax_sequence,
        argmax_by_length=by_length,
    )
    return BehaviorModel(name=hmm.name, hmm=hmm, t_nominal=int(data["t_nominal"]), normalizer=normalizer)


# Event and report streams

def parse_event_line(line: str, line_number: int, source: str = "") -> ObservationEvent:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"invalid JSON ({e.msg})", line_number, source)
    if not isinstance(data, dict) or "t" not in data or "sym" not in data:
        raise InputFormatError('expected an object with "t" and "sym"', line_number, source)
    t, sym = data["t"], data["sym"]
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
        raise InputFormatError(f'"t" must be a finite number, got {t!r}', line_number, source)
    if isinstance(sym, bool) or not isinstance(sym, int):
        raise InputFormatError(f'"sym" must be an integer, got {sym!r}', line_number, source)
    return ObservationEvent(timestamp=float(t), symbol=sym)


def iter_event_file(path: PathLike) -> Iterator[Tuple[int, ObservationEvent]]:
    """Yield (line number, event) for every non-blank line of a JSONL event file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if line.strip():
                    yield number, parse_event_line(line, number, str(path))
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}")


def event_to_line(event: ObservationEvent) -> str:
    return json.dumps({"t": event.timestamp, "sym": event.symbol})


def write_event_file(path: PathLike, events) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            for event in events:
                f.write(event_to_line(event) + "\n")
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}")


def report_to_dict(report: RecognitionReport) -> Dict[str, Any]:
    return {
        "t_event": report.t,
        "time": report.timestamp,
        "L": report.likelihood_map(),
        "posterior": report.posterior_map(),
        "argmax": report.argmax_behavior,
    }


def report_to_line(report: RecognitionReport) -> str:
    return json.dumps(report_to_dict(report), allow_nan=False)


# Positions

def read_positions_csv(path: PathLike) -> pd.DataFrame:
    """
    Read a `t,x,y` position stream.

    Blank lines are dropped but the index keeps counting them, so row `i`
    came from file line `i + 2`.

    Raises:
        InputFormatError: With the 1-based file line of the first unparseable row.
    """
    try:
        frame = pd.read_csv(path, dtype=str, skip_blank_lines=False)
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}")
    except pd.errors.EmptyDataError:
        raise InputFormatError("missing header t,x,y", 1, str(path))
    except pd.errors.ParserError as e:
        raise InputFormatError(f"malformed CSV ({e})", 1, str(path))

    columns = [c.strip() for c in frame.columns]
    if columns[:3] != ["t", "x", "y"]:
        raise InputFormatError(f"expected header t,x,y, got {','.join(columns)}", 1, str(path))
    frame.columns = columns
    frame = frame.dropna(how="all")
    numeric = frame[["t", "x", "y"]].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise InputFormatError(
            f"non-numeric values {frame.iloc[row][['t', 'x', 'y']].tolist()}",
            int(frame.index[row]) + 2,
            str(path),
        )
    return numeric


def write_positions_csv(path: PathLike, measurements: np.ndarray) -> None:
    frame = pd.DataFrame(np.asarray(measurements, dtype=float).reshape(-1, 3), columns=["t", "x", "y"])
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}")


# Simulated runs

def _run_meta(run: SimRun) -> Dict[str, Any]:
    config = run.config
    return {
        "behavior": run.behavior,
        "seed": config.seed,
        "scale": config.scale,
        "direction": config.direction,
        "initial_heading": config.initial_heading,
        "speed": config.speed,
        "sample_rate": config.sample_rate,
        "position_noise_sigma": config.position_noise_sigma,
        "detection_range": config.detection_range if math.isfinite(config.detection_range) else None,
        "observer_position": list(config.observer_position),
        "center": list(config.center),
        "turn_rate": config.turn_rate,
        "path_length": run.path_length,
        "expected_turn_events": [
            {"time": e.time, "angle": e.angle, "symbol": e.symbol} for e in run.true_turn_events
        ],
    }


def write_sim_run(directory: PathLike, run: SimRun) -> Path:
    """Persist a run as measurements.csv, truth.csv and meta.json."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        write_positions_csv(directory / "measurements.csv", run.measurements)
        truth = pd.DataFrame(run.ground_truth, columns=["t", "x", "y", "heading", "distance"])
        truth.to_csv(directory / "truth.csv", index=False)
    except OSError as e:
        raise StorageError(f"Cannot write run directory {directory}: {e}")
    _write_json(directory / "meta.json", _run_meta(run))
    return directory


def read_sim_run(directory: PathLike) -> SimRun:
    directory = Path(directory)
    if not directory.is_dir():
        raise StorageError(f"Run directory {directory} does not exist.")
    meta = _read_json(directory / "meta.json")
    try:
        config = RunConfig(
            seed=int(meta["seed"]),
            scale=float(meta["scale"]),
            initial_heading=float(meta.get("initial_heading", 0.0)),
            direction=str(meta["direction"]),
            speed=float(meta.get("speed", RunConfig.speed)),
            sample_rate=float(meta.get("sample_rate", RunConfig.sample_rate)),
            position_noise_sigma=float(meta.get("position_noise_sigma", RunConfig.position_noise_sigma)),
            detection_range=math.inf if meta.get("detection_range") is None else float(meta["detection_range"]),
            observer_position=tuple(meta.get("observer_position", RunConfig.observer_position)),
            center=tuple(meta.get("center", RunConfig.center)),
            turn_rate=float(meta.get("turn_rate", RunConfig.turn_rate)),
        )
        events = [
            TrueTurnEvent(time=float(e["time"]), angle=float(e["angle"]), symbol=int(e["symbol"]))
            for e in meta["expected_turn_events"]
        ]
        path_length = float(meta["path_length"])
        behavior = str(meta["behavior"])
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"Run metadata {directory / 'meta.json'} is malformed: {e}")

    measurements = read_positions_csv(directory / "measurements.csv").to_numpy()
    try:
        truth = pd.read_csv(directory / "truth.csv", float_precision="round_trip").to_numpy(dtype=float)
    except OSError as e:
        raise StorageError(f"Cannot read {directory / 'truth.csv'}: {e}")
    return SimRun(
        behavior=behavior,
        config=config,
        measurements=measurements,
        ground_truth=truth,
        true_turn_events=events,
        path_length=path_length,
    )


def list_run_dirs(root: PathLike) -> List[Path]:
    """Run directories (those holding a meta.json) under root, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise StorageError(f"Run directory {root} does not exist.")
    return sorted(p for p in root.iterdir() if (p / "meta.json").is_file())
