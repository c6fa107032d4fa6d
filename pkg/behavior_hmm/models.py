"""
Data models shared across behavior-hmm.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class HmmModel:
    """Discrete-emission hidden Markov model lambda = (A, B, pi)."""
    pi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen_array(self.pi))
        object.__setattr__(self, "a", _frozen_array(self.a))
        object.__setattr__(self, "b", _frozen_array(self.b))

    @property
    def n_states(self) -> int:
        return int(self.pi.shape[0]) if self.pi.ndim >= 1 else 0

    @property
    def n_symbols(self) -> int:
        return int(self.b.shape[1]) if self.b.ndim == 2 else 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, HmmModel):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.pi, other.pi)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )


@dataclass
class ObservationSequence:
    """Timestamped discrete symbols O_1 ... O_T, possibly irregularly spaced."""
    symbols: List[int] = field(default_factory=list)
    timestamps: Optional[List[float]] = None
    label: Optional[str] = None

    def __post_init__(self):
        self.symbols = [int(s) for s in self.symbols]
        if self.timestamps is None:
            self.timestamps = [float(i) for i in range(len(self.symbols))]
        else:
            self.timestamps = [float(t) for t in self.timestamps]
        if len(self.timestamps) != len(self.symbols):
            raise ValueError("symbols and timestamps must have the same length")
        if any(later < earlier for earlier, later in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be nondecreasing")

    def __len__(self) -> int:
        return len(self.symbols)

    @classmethod
    def from_events(cls, events: Sequence["ObservationEvent"], label: Optional[str] = None) -> "ObservationSequence":
        return cls(
            symbols=[e.symbol for e in events],
            timestamps=[e.timestamp for e in events],
            label=label,
        )


@dataclass(frozen=True)
class ObservationEvent:
    """A single event-based observation symbol."""
    timestamp: float
    symbol: int
    turn_angle: Optional[float] = None  # degrees, diagnostics only


@dataclass(frozen=True, eq=False)
class ForwardState:
    """Renormalized forward variables after t observations."""
    alpha_hat: np.ndarray
    log_prob: float
    t: int

    @property
    def is_impossible(self) -> bool:
        return self.log_prob == -math.inf


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of validate_model: ok, or the list of violated constraints."""
    violations: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class NormalizerTable:
    """Per-length maxima of log P(O_1:t | lambda) for t = 1 ... t_max."""
    model_name: str
    max_log_prob: Tuple[float, ...]
    argmax_sequence: Tuple[int, ...]
    argmax_by_length: Tuple[Tuple[int, ...], ...] = ()

    @property
    def t_max(self) -> int:
        return len(self.max_log_prob)

    def log_max(self, t: int) -> float:
        """Return max log-probability over sequences of length t (1-based)."""
        return self.max_log_prob[t - 1]


@dataclass(frozen=True)
class BehaviorModel:
    """A named HMM with its nominal event count and normalizer table."""
    name: str
    hmm: HmmModel
    t_nominal: int
    normalizer: NormalizerTable


@dataclass(frozen=True, eq=False)
class TrackState:
    """Kalman estimate of position and velocity."""
    mean: np.ndarray        # [x, y, vx, vy]
    covariance: np.ndarray  # 4 x 4
    last_time: float

    @property
    def x(self) -> float:
        return float(self.mean[0])

    @property
    def y(self) -> float:
        return float(self.mean[1])

    @property
    def vx(self) -> float:
        return float(self.mean[2])

    @property
    def vy(self) -> float:
        return float(self.mean[3])

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def heading(self) -> float:
        """Velocity direction in radians."""
        return math.atan2(self.vy, self.vx)


@dataclass(frozen=True)
class RecognitionReport:
    """Per-behavior scores after one observation event."""
    t: int
    timestamp: float
    names: Tuple[str, ...]
    log_probs: Tuple[float, ...]
    likelihoods: Tuple[float, ...]
    posterior: Optional[Tuple[float, ...]]
    argmax_behavior: str

    @property
    def posterior_defined(self) -> bool:
        return self.posterior is not None

    def likelihood_map(self) -> Dict[str, float]:
        return dict(zip(self.names, self.likelihoods))

    def posterior_map(self) -> Optional[Dict[str, float]]:
        if self.posterior is None:
            return None
        return dict(zip(self.names, self.posterior))
