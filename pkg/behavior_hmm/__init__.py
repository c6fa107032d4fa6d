"""
behavior-hmm - online recognition of agent behaviors with hidden Markov models.

Each behavior is a discrete HMM over quantized turn events. Observing an agent
yields a stream of events; after every event the recognizer reports, for each
behavior, a likelihood normalized by the best achievable sequence of the same
length, plus the closed-set posterior.
"""

__version__ = "1.0.0"

from .config import ExperimentConfig, FilterConfig, QuantizerConfig, RunConfig, Settings, TrainConfig
from .errors import BehaviorHmmError, StorageError, ValidationError
from .hmm import (
    baum_welch_train,
    forward_fold,
    forward_init,
    forward_step,
    left_to_right_init,
    sequence_log_prob,
    validate_model,
)
from .models import BehaviorModel, HmmModel, ObservationEvent, ObservationSequence, RecognitionReport
from .normalizer import build_normalizer_table, extend_normalizer_table
from .perception import kf_update, quantize_turn, track_positions, TurnEventDetector
from .recognizer import BehaviorSet, RecognitionSession, exclusive_posterior, load_behavior_set
from .simulator import TEMPLATES, build_behavior_path, simulate_run

__all__ = [
    "BehaviorHmmError",
    "BehaviorModel",
    "BehaviorSet",
    "ExperimentConfig",
    "FilterConfig",
    "HmmModel",
    "ObservationEvent",
    "ObservationSequence",
    "QuantizerConfig",
    "RecognitionReport",
    "RecognitionSession",
    "RunConfig",
    "Settings",
    "StorageError",
    "TEMPLATES",
    "TrainConfig",
    "TurnEventDetector",
    "ValidationError",
    "baum_welch_train",
    "build_behavior_path",
    "build_normalizer_table",
    "exclusive_posterior",
    "extend_normalizer_table",
    "forward_fold",
    "forward_init",
    "forward_step",
    "kf_update",
    "left_to_right_init",
    "load_behavior_set",
    "quantize_turn",
    "sequence_log_prob",
    "simulate_run",
    "track_positions",
]
