"""
Online behavior recognition.

Every behavior keeps its own forward state. After each observation event the
recognizer reports two scores per behavior:

* the normalized likelihood L = P(O_1:t | lambda) / max P(O'_1:t | lambda)
  scaled by min(t / T, 1), which is independent across behaviors, and
* the posterior under a uniform prior, which assumes exactly one behavior is
  being executed.
"""

import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .config import DEFAULT_NODE_BUDGET
from .errors import (
    AlphabetMismatchError,
    ModelValidationError,
    OutOfAlphabetError,
    UndefinedPosteriorError,
    ValidationError,
)
from .hmm import forward_init, forward_step, require_valid, sequence_log_prob
from .models import BehaviorModel, ForwardState, HmmModel, ObservationEvent, RecognitionReport
from .normalizer import extend_normalizer_table, verify_witness
from .storage import read_behavior_file

logger = logging.getLogger(__name__)


def exclusive_posterior(log_probs: Sequence[float]) -> np.ndarray:
    """
    Posterior over behaviors under a uniform prior.

    Args:
        log_probs: log P(O_1:t | lambda_i) for every behavior.

    Returns:
        Array of posteriors summing to one.

    Raises:
        UndefinedPosteriorError: If every log-probability is -inf.
    """
    values = np.asarray(log_probs, dtype=float)
    if values.size == 0:
        raise ValidationError("exclusive_posterior needs at least one behavior.")
    if np.all(np.isneginf(values)):
        raise UndefinedPosteriorError("Every behavior assigns zero probability to the observations.")
    return np.exp(values - logsumexp(values))


def posterior_from_models(models: Sequence[HmmModel], seq) -> np.ndarray:
    """Score one complete sequence under several models and return the posterior."""
    return exclusive_posterior([sequence_log_prob(model, seq) for model in models])


def ensure_normalizer(
    behavior: BehaviorModel, t: int, budget: int = DEFAULT_NODE_BUDGET
) -> BehaviorModel:
    """Return the behavior with a normalizer covering length t, extending it if needed."""
    if t <= behavior.normalizer.t_max:
        return behavior
    table = extend_normalizer_table(behavior.normalizer, behavior.hmm, t, budget)
    return BehaviorModel(
        name=behavior.name, hmm=behavior.hmm, t_nominal=behavior.t_nominal, normalizer=table
    )


def behavior_likelihood(
    behavior: BehaviorModel, state: ForwardState, budget: int = DEFAULT_NODE_BUDGET
) -> float:
    """
    Normalized likelihood of the observations so far, in [0, 1].

    Args:
        behavior: Behavior model with its normalizer table.
        state: Forward state after t >= 1 observations.
        budget: Node budget if the normalizer has to be extended past t_max.

    Returns:
        exp(log_prob - max_log_prob[t]) * min(t / T, 1).
    """
    if state.t < 1:
        raise ValidationError("behavior_likelihood needs at least one observation.")
    if state.is_impossible:
        return 0.0
    behavior = ensure_normalizer(behavior, state.t, budget)
    ratio = math.exp(min(state.log_prob - behavior.normalizer.log_max(state.t), 0.0))
    return ratio * min(state.t / behavior.t_nominal, 1.0)


def _check_behaviors(behaviors: Sequence[BehaviorModel]) -> int:
    if not behaviors:
        raise ValidationError("At least one behavior model is required.")
    names = [b.name for b in behaviors]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ValidationError(f"Duplicate behavior names: {', '.join(duplicates)}.")
    alphabets = {b.name: b.hmm.n_symbols for b in behaviors}
    if len(set(alphabets.values())) > 1:
        raise AlphabetMismatchError(
            "Behavior models disagree on the alphabet size: "
            + ", ".join(f"{name}={m}" for name, m in sorted(alphabets.items()))
        )
    for behavior in behaviors:
        require_valid(behavior.hmm)
        if behavior.t_nominal < 1:
            raise ModelValidationError(f"Behavior '{behavior.name}' has t_nominal < 1.")
        if behavior.normalizer.t_max < behavior.t_nominal:
            raise ModelValidationError(
                f"Behavior '{behavior.name}' has a normalizer up to t={behavior.normalizer.t_max} "
                f"but t_nominal={behavior.t_nominal}."
            )
        verify_witness(behavior.normalizer, behavior.hmm)
    return next(iter(alphabets.values()))


class RecognitionSession:
    """
    Incremental recognizer over a fixed set of behaviors.

    Behaviors are held in name order; ties in the argmax go to the first.
    A session is single-threaded; use one session per observed agent.
    """

    def __init__(self, behaviors: Sequence[BehaviorModel], node_budget: int = DEFAULT_NODE_BUDGET):
        self.n_symbols = _check_behaviors(behaviors)
        self.behaviors: List[BehaviorModel] = sorted(behaviors, key=lambda b: b.name)
        self.names: Tuple[str, ...] = tuple(b.name for b in self.behaviors)
        self.node_budget = node_budget
        self.states: List[Optional[ForwardState]] = [None] * len(self.behaviors)
        self.t = 0
        self.history: List[RecognitionReport] = []

    def reset(self) -> None:
        self.states = [None] * len(self.behaviors)
        self.t = 0
        self.history = []

    def step(self, event: Union[ObservationEvent, Tuple[float, int]]) -> RecognitionReport:
        """
        Consume one observation event and report all behavior scores.

        The symbol is validated before any state changes, so a rejected event
        leaves the session exactly as it was.
        """
        if isinstance(event, ObservationEvent):
            timestamp, symbol = event.timestamp, event.symbol
        else:
            timestamp, symbol = event
        if isinstance(symbol, bool) or not isinstance(symbol, (int, np.integer)) \
                or not 0 <= symbol < self.n_symbols:
            raise OutOfAlphabetError(symbol, self.n_symbols)
        symbol = int(symbol)

        new_states = []
        new_behaviors = []
        for behavior, state in zip(self.behaviors, self.states):
            if state is None:
                new_state = forward_init(behavior.hmm, symbol)
            else:
                new_state = forward_step(state, behavior.hmm, symbol)
            new_states.append(new_state)
            new_behaviors.append(ensure_normalizer(behavior, new_state.t, self.node_budget))

        log_probs = tuple(float(s.log_prob) for s in new_states)
        likelihoods = tuple(
            behavior_likelihood(b, s, self.node_budget) for b, s in zip(new_behaviors, new_states)
        )
        try:
            posterior: Optional[Tuple[float, ...]] = tuple(float(p) for p in exclusive_posterior(log_probs))
        except UndefinedPosteriorError:
            posterior = None
        best = int(np.argmax(likelihoods))

        self.behaviors = new_behaviors
        self.states = new_states
        self.t += 1
        report = RecognitionReport(
            t=self.t,
            timestamp=float(timestamp),
            names=self.names,
            log_probs=log_probs,
            likelihoods=likelihoods,
            posterior=posterior,
            argmax_behavior=self.names[best],
        )
        self.history.append(report)
        return report

    def run(self, events: Iterable[ObservationEvent]) -> List[RecognitionReport]:
        return [self.step(event) for event in events]


def recognition_step(session: RecognitionSession, event: ObservationEvent) -> RecognitionReport:
    """Functional form of RecognitionSession.step."""
    return session.step(event)


class BehaviorSet:
    """A validated collection of behavior models sharing one alphabet."""

    def __init__(self, behaviors: Sequence[BehaviorModel], node_budget: int = DEFAULT_NODE_BUDGET):
        self.n_symbols = _check_behaviors(behaviors)
        self.behaviors: List[BehaviorModel] = sorted(behaviors, key=lambda b: b.name)
        self.node_budget = node_budget

    @property
    def names(self) -> List[str]:
        return [b.name for b in self.behaviors]

    def __len__(self) -> int:
        return len(self.behaviors)

    def new_session(self) -> RecognitionSession:
        return RecognitionSession(self.behaviors, self.node_budget)


def load_behavior_set(
    paths: Union[str, Path, Sequence[Union[str, Path]]], node_budget: int = DEFAULT_NODE_BUDGET
) -> BehaviorSet:
    """
    Load behavior files, or every *.json file in a directory.

    Raises:
        ValidationError: If no models are found or a model fails validation.
        StorageError: If a file cannot be read.
    """
    if isinstance(paths, (str, Path)):
        root = Path(paths)
        files = sorted(root.glob("*.json")) if root.is_dir() else [root]
    else:
        files = [Path(p) for p in paths]
    if not files:
        raise ValidationError(f"No behavior models found in {paths}.")

    behaviors = [read_behavior_file(path) for path in files]
    behavior_set = BehaviorSet(behaviors, node_budget)
    logger.info("Loaded %d behaviors: %s", len(behavior_set), ", ".join(behavior_set.names))
    return behavior_set
