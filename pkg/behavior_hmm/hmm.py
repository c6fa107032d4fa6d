"""
Discrete hidden Markov model core.

Forward variables are renormalized at every step and the scale factors are
accumulated in log space, so probabilities of long sequences never underflow.
The same step function backs online recognition, offline scoring and the
normalizer search, which keeps all three bit-identical.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import TrainConfig
from .errors import (
    ConfigurationError,
    EmptySequenceError,
    ModelValidationError,
    OutOfAlphabetError,
    TrainingDataError,
)
from .models import ForwardState, HmmModel, ObservationSequence, ValidationResult

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-9

SymbolsLike = Union[ObservationSequence, Sequence[int], np.ndarray]


def validate_model(model: HmmModel) -> ValidationResult:
    """
    Check every probability invariant of an HMM.

    Args:
        model: The model to check.

    Returns:
        ValidationResult that is ok, or lists each violated constraint with
        its row/column indices.
    """
    violations: List[str] = []
    pi, a, b = model.pi, model.a, model.b

    if pi.ndim != 1 or pi.shape[0] < 1:
        violations.append(f"pi must be a non-empty vector, got shape {pi.shape}")
        return ValidationResult(tuple(violations))
    n = pi.shape[0]
    if a.shape != (n, n):
        violations.append(f"a must have shape ({n}, {n}), got {a.shape}")
    if b.ndim != 2 or b.shape[0] != n or b.shape[1] < 1:
        violations.append(f"b must have shape ({n}, M) with M >= 1, got {b.shape}")
    if violations:
        return ValidationResult(tuple(violations))

    for label, matrix in (("a", a), ("b", b)):
        for (i, j), value in np.ndenumerate(matrix):
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                violations.append(f"entry ({i},{j}) of {label} is {value!r}, outside [0, 1]")
        for i, total in enumerate(matrix.sum(axis=1)):
            if not abs(total - 1.0) <= ROW_SUM_TOLERANCE:
                violations.append(f"row {i} of {label} sums to {total!r}, not 1")

    for i, value in enumerate(pi):
        if not (math.isfinite(value) and 0.0 <= value <= 1.0):
            violations.append(f"entry {i} of pi is {value!r}, outside [0, 1]")
    total = pi.sum()
    if not abs(total - 1.0) <= ROW_SUM_TOLERANCE:
        violations.append(f"pi sums to {total!r}, not 1")

    return ValidationResult(tuple(violations))


def require_valid(model: HmmModel) -> None:
    result = validate_model(model)
    if not result.ok:
        raise ModelValidationError(f"Model '{model.name}' is invalid", result.violations)


def _check_symbol(model: HmmModel, symbol) -> int:
    try:
        index = int(symbol)
    except (TypeError, ValueError):
        raise OutOfAlphabetError(symbol, model.n_symbols)
    if index != symbol or not 0 <= index < model.n_symbols:
        raise OutOfAlphabetError(symbol, model.n_symbols)
    return index


def _symbols_of(seq: SymbolsLike) -> List[int]:
    if isinstance(seq, ObservationSequence):
        return list(seq.symbols)
    return [s for s in seq]


def _renormalized(unnormalized: np.ndarray, log_prob: float, t: int) -> ForwardState:
    total = float(unnormalized.sum())
    if total > 0.0 and log_prob != -math.inf:
        # a step can never raise the probability; clamp rounding above 1
        return ForwardState(unnormalized / total, log_prob + min(math.log(total), 0.0), t)
    return ForwardState(np.zeros_like(unnormalized), -math.inf, t)


def forward_init(model: HmmModel, symbol: int) -> ForwardState:
    """
    Initialize forward variables with alpha_1(i) = pi_i * b_i(O_1).

    Args:
        model: The HMM.
        symbol: The first observation symbol.

    Returns:
        ForwardState at t = 1. If no state can emit the symbol, log_prob is -inf.
    """
    k = _check_symbol(model, symbol)
    return _renormalized(model.pi * model.b[:, k], 0.0, 1)


def forward_step(state: ForwardState, model: HmmModel, symbol: int) -> ForwardState:
    """
    Advance forward variables by one observation.

    Implements alpha_{t+1}(j) = [sum_i alpha_t(i) a_ij] * b_j(O_{t+1}) on the
    renormalized vector; log_prob grows by the log of the pre-normalization sum.
    Once log_prob is -inf it stays -inf.
    """
    k = _check_symbol(model, symbol)
    if state.is_impossible:
        return ForwardState(state.alpha_hat, -math.inf, state.t + 1)
    predicted = state.alpha_hat @ model.a
    return _renormalized(predicted * model.b[:, k], state.log_prob, state.t + 1)


def forward_fold(model: HmmModel, seq: SymbolsLike) -> ForwardState:
    """Fold forward_init/forward_step over a whole sequence."""
    symbols = _symbols_of(seq)
    if not symbols:
        raise EmptySequenceError("Cannot evaluate an empty observation sequence.")
    for symbol in symbols:
        _check_symbol(model, symbol)
    state = forward_init(model, symbols[0])
    for symbol in symbols[1:]:
        state = forward_step(state, model, symbol)
    return state


def sequence_log_prob(model: HmmModel, seq: SymbolsLike) -> float:
    """
    Return log P(O | lambda) for a complete observation sequence.

    Raises:
        EmptySequenceError: If the sequence has no symbols.
        OutOfAlphabetError: If any symbol is not in [0, M).
    """
    return forward_fold(model, seq).log_prob


def sequence_log_probs(model: HmmModel, sequences: Sequence[SymbolsLike]) -> np.ndarray:
    """Score several sequences under one model."""
    return np.array([sequence_log_prob(model, seq) for seq in sequences], dtype=float)


def sample_sequence(model: HmmModel, length: int, seed: int) -> ObservationSequence:
    """
    Draw an observation sequence from the model.

    Args:
        model: The HMM to sample from.
        length: Number of symbols (0 gives an empty sequence).
        seed: RNG seed; equal seeds give equal sequences.

    Returns:
        ObservationSequence with timestamps 0, 1, 2, ...
    """
    if length < 0:
        raise ConfigurationError("length must be non-negative.")
    rng = np.random.default_rng(seed)
    symbols: List[int] = []
    if length == 0:
        return ObservationSequence(symbols=symbols)

    state = int(rng.choice(model.n_states, p=model.pi))
    for step in range(length):
        symbols.append(int(rng.choice(model.n_symbols, p=model.b[state])))
        if step + 1 < length:
            state = int(rng.choice(model.n_states, p=model.a[state]))
    return ObservationSequence(symbols=symbols)


def left_to_right_init(
    n_states: int,
    n_symbols: int,
    seed: int,
    n_chains: int = 1,
    seed_sequences: Optional[Sequence[Sequence[SymbolsLike]]] = None,
    blend: float = 0.5,
    name: str = "",
) -> HmmModel:
    """
    Build a left-to-right starting point for Baum-Welch.

    Each chain self-loops with 0.5 and advances with 0.5; its last state is
    absorbing. pi is spread evenly over the chain heads. Emissions are uniform
    with a seeded +/-10% perturbation, optionally blended with the positional
    symbol histogram of per-chain seed sequences.

    Args:
        n_states: Total number of states N (a multiple of n_chains).
        n_symbols: Alphabet size M.
        seed: Seed for the emission perturbation.
        n_chains: Number of parallel chains.
        seed_sequences: Optional list (one entry per chain) of sequences whose
            i-th symbol counts toward the chain's i-th state.
        blend: Weight of the histogram when seed_sequences is given.
        name: Model name.

    Returns:
        A valid HmmModel.
    """
    if n_states < 1 or n_symbols < 1:
        raise ConfigurationError("n_states and n_symbols must be positive.")
    if n_chains < 1 or n_states % n_chains:
        raise ConfigurationError(f"n_states {n_states} is not a multiple of n_chains {n_chains}.")
    if not 0.0 <= blend <= 1.0:
        raise ConfigurationError("blend must lie in [0, 1].")

    chain_length = n_states // n_chains
    a = np.zeros((n_states, n_states))
    pi = np.zeros(n_states)
    for chain in range(n_chains):
        head = chain * chain_length
        pi[head] = 1.0 / n_chains
        for offset in range(chain_length):
            i = head + offset
            if offset == chain_length - 1:
                a[i, i] = 1.0
            else:
                a[i, i] = 0.5
                a[i, i + 1] = 0.5

    rng = np.random.default_rng(seed)
    b = (1.0 + rng.uniform(-0.1, 0.1, size=(n_states, n_symbols))) / n_symbols
    b /= b.sum(axis=1, keepdims=True)

    if seed_sequences is not None:
        if len(seed_sequences) != n_chains:
            raise ConfigurationError("seed_sequences needs one entry per chain.")
        for chain, sequences in enumerate(seed_sequences):
            counts = np.zeros((chain_length, n_symbols))
            for seq in sequences:
                for position, symbol in enumerate(_symbols_of(seq)):
                    if not 0 <= symbol < n_symbols:
                        raise OutOfAlphabetError(symbol, n_symbols)
                    counts[min(position, chain_length - 1), symbol] += 1.0
            for offset, row in enumerate(counts):
                total = row.sum()
                if total > 0:
                    i = chain * chain_length + offset
                    b[i] = blend * row / total + (1.0 - blend) * b[i]

    return HmmModel(pi=pi, a=a, b=b, name=name)


@dataclass
class TrainResult:
    """Outcome of Baum-Welch training."""
    model: HmmModel
    trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    reset_rows: List[Tuple[str, int]] = field(default_factory=list)

    @property
    def initial_log_likelihood(self) -> float:
        return self.trace[0]

    @property
    def final_log_likelihood(self) -> float:
        return self.trace[-1]


@dataclass
class _SufficientStats:
    pi: np.ndarray
    a: np.ndarray
    b: np.ndarray


def _expectation(model: HmmModel, sequences: List[np.ndarray]) -> Tuple[float, _SufficientStats]:
    n, m = model.n_states, model.n_symbols
    a, b = model.a, model.b
    stats = _SufficientStats(np.zeros(n), np.zeros((n, n)), np.zeros((n, m)))
    total = 0.0

    for index, obs in enumerate(sequences):
        length = obs.shape[0]
        alpha = np.empty((length, n))
        scale = np.empty(length)

        emit = b[:, obs].T  # (T, N) emission probabilities of the observed symbols
        unnormalized = model.pi * emit[0]
        for t in range(length):
            if t > 0:
                unnormalized = (alpha[t - 1] @ a) * emit[t]
            scale[t] = unnormalized.sum()
            if scale[t] <= 0.0:
                raise TrainingDataError(
                    f"Training sequence {index} has zero probability under the current model "
                    f"(first impossible symbol at position {t})."
                )
            alpha[t] = unnormalized / scale[t]

        beta = np.empty((length, n))
        beta[-1] = 1.0
        for t in range(length - 2, -1, -1):
            beta[t] = a @ (emit[t + 1] * beta[t + 1]) / scale[t + 1]

        gamma = alpha * beta
        stats.pi += gamma[0]
        if length > 1:
            weighted = (emit[1:] * beta[1:]) / scale[1:, None]
            stats.a += a * (alpha[:-1].T @ weighted)
        for symbol in np.unique(obs):
            stats.b[:, symbol] += gamma[obs == symbol].sum(axis=0)
        total += float(np.log(scale).sum())

    return total, stats


def _normalize_rows(counts: np.ndarray, label: str, resets: List[Tuple[str, int]]) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True)
    result = np.empty_like(counts)
    for i in range(counts.shape[0]):
        if totals[i, 0] > 0.0:
            result[i] = counts[i] / totals[i, 0]
        else:
            logger.warning("State %d has no expected %s counts; resetting the row to uniform.", i, label)
            resets.append((label, i))
            result[i] = 1.0 / counts.shape[1]
    return result


def _maximization(
    model: HmmModel, stats: _SufficientStats, emission_floor: float, resets: List[Tuple[str, int]]
) -> HmmModel:
    pi = stats.pi / stats.pi.sum()
    a = _normalize_rows(stats.a, "a", resets)
    b = _normalize_rows(stats.b, "b", resets)
    if emission_floor > 0.0:
        b = _floor_emissions(b, emission_floor)
    return HmmModel(pi=pi, a=a, b=b, name=model.name)


def _floor_emissions(b: np.ndarray, emission_floor: float) -> np.ndarray:
    b = np.maximum(b, emission_floor)
    return b / b.sum(axis=1, keepdims=True)


def baum_welch_train(
    sequences: Sequence[SymbolsLike],
    init: HmmModel,
    config: Optional[TrainConfig] = None,
) -> TrainResult:
    """
    Re-estimate (A, B, pi) from several observation sequences.

    Expected counts from a scaled forward-backward pass are pooled across all
    sequences. The emission floor is applied to the starting emissions and
    after every M-step, so with a positive floor no sequence can have zero
    likelihood. Training stops after config.max_iterations re-estimations or
    when the total log-likelihood improves by less than the tolerance.

    Args:
        sequences: One or more non-empty observation sequences.
        init: Starting model; must pass validate_model.
        config: Stopping rule and emission floor.

    Returns:
        TrainResult whose trace[i] is the total log-likelihood of the model
        after i re-estimations; trace[-1] belongs to the returned model.

    Raises:
        TrainingDataError: If the training set or a sequence is empty, or, with
            a zero floor, a sequence has zero probability under `init`.
    """
    config = config or TrainConfig()
    config.validate(init.n_symbols)
    require_valid(init)

    if not sequences:
        raise TrainingDataError("Baum-Welch needs at least one sequence.")
    arrays: List[np.ndarray] = []
    for index, seq in enumerate(sequences):
        symbols = _symbols_of(seq)
        if not symbols:
            raise TrainingDataError(f"Training sequence {index} is empty.")
        for symbol in symbols:
            _check_symbol(init, symbol)
        arrays.append(np.array(symbols, dtype=int))

    model = init
    if config.emission_floor > 0.0 and init.b.min() < config.emission_floor:
        model = HmmModel(
            pi=init.pi, a=init.a, b=_floor_emissions(init.b, config.emission_floor), name=init.name
        )
    trace: List[float] = []
    resets: List[Tuple[str, int]] = []
    iterations = 0
    converged = False

    while True:
        log_likelihood, stats = _expectation(model, arrays)
        trace.append(log_likelihood)
        if len(trace) >= 2:
            delta = trace[-1] - trace[-2]
            logger.debug("iteration %4d  log-likelihood %.6f  delta %+.3e", iterations, log_likelihood, delta)
            if delta < config.log_likelihood_tolerance:
                converged = True
                break
        if iterations >= config.max_iterations:
            break
        model = _maximization(model, stats, config.emission_floor, resets)
        iterations += 1

    require_valid(model)
    logger.info(
        "Trained '%s' on %d sequences: %d iterations, log-likelihood %.4f -> %.4f%s",
        model.name, len(arrays), iterations, trace[0], trace[-1],
        "" if converged else " (iteration limit)",
    )
    return TrainResult(model=model, trace=trace, iterations=iterations, converged=converged, reset_rows=resets)
