"""
Configuration management for behavior-hmm.

Runtime settings come from the environment (optionally a .env file);
algorithm parameters live in small frozen dataclasses that validate themselves.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigurationError, StorageError

# Load environment variables from .env file
load_dotenv()

BEHAVIOR_NAMES: Tuple[str, ...] = (
    "rectangle",
    "triangle",
    "convex_box",
    "concave_box",
    "trapezoid",
    "hourglass",
)

DEFAULT_NODE_BUDGET = 10_000_000


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got '{raw}'.")


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be a number, got '{raw}'.")


class Settings:
    """Process-wide settings read from the environment."""

    def __init__(
        self,
        log_level: Optional[str] = None,
        node_budget: Optional[int] = None,
        workers: Optional[int] = None,
        emission_floor: Optional[float] = None,
    ):
        """
        Initialize settings.

        Args:
            log_level: Logging level name. Falls back to BEHAVIOR_HMM_LOG_LEVEL.
            node_budget: Normalizer search node limit. Falls back to BEHAVIOR_HMM_NODE_BUDGET.
            workers: Worker processes for evaluation. Falls back to BEHAVIOR_HMM_WORKERS.
            emission_floor: Emission floor for training. Falls back to BEHAVIOR_HMM_EMISSION_FLOOR.
        """
        self.log_level = (log_level or os.getenv("BEHAVIOR_HMM_LOG_LEVEL") or "INFO").upper()
        self.node_budget = node_budget if node_budget is not None else _env_int(
            "BEHAVIOR_HMM_NODE_BUDGET", DEFAULT_NODE_BUDGET
        )
        self.workers = workers if workers is not None else _env_int("BEHAVIOR_HMM_WORKERS", 1)
        self.emission_floor = emission_floor if emission_floor is not None else _env_float(
            "BEHAVIOR_HMM_EMISSION_FLOOR", 1e-3
        )

        if not self.validate():
            raise ConfigurationError(
                "Invalid settings: log level must be a logging level name, node budget and "
                "workers must be positive, emission floor must lie in [0, 0.1]."
            )

    @classmethod
    def from_env(cls) -> "Settings":
        """Create settings from environment variables."""
        return cls()

    def validate(self) -> bool:
        """Validate that all settings are usable."""
        return (
            self.log_level in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
            and self.node_budget > 0
            and self.workers > 0
            and 0.0 <= self.emission_floor <= 0.1
        )


@dataclass(frozen=True)
class TrainConfig:
    """Baum-Welch stopping rule, emission floor and initialization seed."""
    max_iterations: int = 100
    log_likelihood_tolerance: float = 1e-6
    emission_floor: float = 1e-3
    seed: int = 0

    def validate(self, n_symbols: Optional[int] = None) -> None:
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be a positive integer.")
        if not self.log_likelihood_tolerance > 0:
            raise ConfigurationError("log_likelihood_tolerance must be positive.")
        if not 0.0 <= self.emission_floor <= 0.1:
            raise ConfigurationError("emission_floor must lie in [0, 0.1].")
        if n_symbols is not None and self.emission_floor >= 1.0 / n_symbols:
            raise ConfigurationError(
                f"emission_floor {self.emission_floor} must be below 1/M = {1.0 / n_symbols:.6g}."
            )


@dataclass(frozen=True)
class FilterConfig:
    """Constant-velocity Kalman filter tuning."""
    process_sigma: float = 0.2          # sigma_a, m/s^2
    measurement_sigma: float = 0.05     # sigma_p, m
    initial_variance: float = 1.0       # diagonal of P0

    def validate(self) -> None:
        if self.process_sigma < 0 or self.measurement_sigma < 0:
            raise ConfigurationError("Filter noise parameters must be non-negative.")
        if not self.initial_variance > 0:
            raise ConfigurationError("initial_variance must be positive.")


@dataclass(frozen=True)
class QuantizerConfig:
    """Turn-event trigger and quantization parameters."""
    n_bins: int = 8
    trigger_angle: float = 30.0         # degrees
    settle_rate: float = 15.0           # degrees / second
    settle_samples: int = 10            # window length
    min_speed: float = 0.1              # m/s
    max_velocity_sigma: float = 0.15    # m/s, velocity std above which headings are ignored

    def validate(self) -> None:
        if self.n_bins < 2 or self.n_bins % 2:
            raise ConfigurationError("n_bins must be an even integer >= 2.")
        if not 0.0 < self.trigger_angle < 180.0:
            raise ConfigurationError("trigger_angle must lie in (0, 180) degrees.")
        if not self.settle_rate > 0:
            raise ConfigurationError("settle_rate must be positive.")
        if self.settle_samples < 2:
            raise ConfigurationError("settle_samples must be at least 2.")
        if self.min_speed < 0:
            raise ConfigurationError("min_speed must be non-negative.")
        if not self.max_velocity_sigma > 0:
            raise ConfigurationError("max_velocity_sigma must be positive.")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one simulated behavior execution."""
    seed: int = 0
    scale: float = 1.0
    initial_heading: float = 0.0        # radians
    direction: str = "ccw"
    speed: float = 0.3                  # m/s
    sample_rate: float = 10.0           # Hz
    position_noise_sigma: float = 0.05  # m
    detection_range: float = 7.5        # m
    observer_position: Tuple[float, float] = (0.0, 0.0)
    center: Tuple[float, float] = (3.0, 0.0)  # placement of the path centroid
    turn_rate: float = 90.0             # degrees / second

    def validate(self) -> None:
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative.")
        if not 0.5 <= self.scale <= 1.5:
            raise ConfigurationError(f"scale {self.scale} must lie in [0.5, 1.5].")
        if self.direction not in ("ccw", "cw"):
            raise ConfigurationError("direction must be 'ccw' or 'cw'.")
        if not self.sample_rate > 0:
            raise ConfigurationError("sample_rate must be positive.")
        if not self.speed > 0:
            raise ConfigurationError("speed must be positive.")
        if not self.turn_rate > 0:
            raise ConfigurationError("turn_rate must be positive.")
        if self.position_noise_sigma < 0:
            raise ConfigurationError("position_noise_sigma must be non-negative.")
        if not self.detection_range > 0:
            raise ConfigurationError("detection_range must be positive (math.inf disables gating).")


@dataclass(frozen=True)
class ExperimentConfig:
    """The six-behavior experiment: training, evaluation and output layout."""
    behaviors: Tuple[str, ...] = BEHAVIOR_NAMES
    runs_per_behavior: int = 10
    training_runs_per_behavior: int = 50
    seed: int = 0
    output_dir: str = "results"
    models_dir: Optional[str] = None
    states: Optional[int] = None
    position_noise_sigma: float = 0.05
    workers: int = 1
    node_budget: int = DEFAULT_NODE_BUDGET
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def resolved_models_dir(self) -> Path:
        return Path(self.models_dir) if self.models_dir else Path(self.output_dir) / "models"

    def validate(self) -> None:
        if not self.behaviors:
            raise ConfigurationError("behaviors must not be empty.")
        unknown = [name for name in self.behaviors if name not in BEHAVIOR_NAMES]
        if unknown:
            raise ConfigurationError(
                f"Unknown behaviors {unknown}. Valid behaviors: {', '.join(BEHAVIOR_NAMES)}."
            )
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative.")
        if self.runs_per_behavior < 1:
            raise ConfigurationError("runs_per_behavior must be at least 1.")
        if self.training_runs_per_behavior < 1:
            raise ConfigurationError("training_runs_per_behavior must be at least 1.")
        if self.states is not None and self.states < 1:
            raise ConfigurationError("states must be a positive integer.")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1.")
        if self.node_budget < 1:
            raise ConfigurationError("node_budget must be positive.")
        if self.position_noise_sigma < 0:
            raise ConfigurationError("position_noise_sigma must be non-negative.")
        self.quantizer.validate()
        self.filter.validate()
        self.train.validate()

    @classmethod
    def from_dict(cls, data: Dict[str, Any], settings: Optional[Settings] = None) -> "ExperimentConfig":
        """
        Build a config from a JSON-shaped mapping; unknown keys are rejected.

        With `settings`, workers, node_budget and train.emission_floor fall back
        to the environment values when the mapping leaves them out.
        """
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigurationError(f"Unknown experiment config keys: {', '.join(extra)}.")

        values: Dict[str, Any] = dict(data)
        if settings is not None:
            values.setdefault("workers", settings.workers)
            values.setdefault("node_budget", settings.node_budget)
            train = values.get("train", {})
            if isinstance(train, dict) and "emission_floor" not in train:
                values["train"] = {**train, "emission_floor": settings.emission_floor}
        nested = {"quantizer": QuantizerConfig, "filter": FilterConfig, "train": TrainConfig}
        for key, record in nested.items():
            if key in values:
                values[key] = _record_from_dict(record, values[key], key)
        if "behaviors" in values:
            values["behaviors"] = tuple(values["behaviors"])

        try:
            config = cls(**values)
        except TypeError as e:
            raise ConfigurationError(f"Invalid experiment config: {e}")
        config.validate()
        return config

    @classmethod
    def from_json(cls, path, settings: Optional[Settings] = None) -> "ExperimentConfig":
        """Load and validate an experiment config file."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise StorageError(f"Cannot read experiment config {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Experiment config {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Experiment config {path} must be a JSON object.")
        return cls.from_dict(data, settings)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["behaviors"] = list(self.behaviors)
        return data

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        return replace(self, **changes)


def _record_from_dict(record, data: Any, key: str):
    if isinstance(data, record):
        return data
    if not isinstance(data, dict):
        raise ConfigurationError(f"'{key}' must be a JSON object.")
    known = {f.name for f in fields(record)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigurationError(f"Unknown '{key}' keys: {', '.join(extra)}.")
    return record(**data)
