"""
Tests for the HMM core: validation, forward recursion, sampling and training.
"""

import itertools
import math

import numpy as np
import numpy.testing as npt
import pytest

from behavior_hmm.config import TrainConfig
from behavior_hmm.errors import (
    ConfigurationError,
    EmptySequenceError,
    ModelValidationError,
    OutOfAlphabetError,
    TrainingDataError,
)
from behavior_hmm.hmm import (
    baum_welch_train,
    forward_fold,
    forward_init,
    forward_step,
    left_to_right_init,
    require_valid,
    sample_sequence,
    sequence_log_prob,
    sequence_log_probs,
    validate_model,
)
from behavior_hmm.models import HmmModel

from .conftest import chain_model, random_model


def brute_force_prob(model: HmmModel, symbols) -> float:
    """Sum over every hidden state path."""
    symbols = list(symbols)
    paths = np.array(list(itertools.product(range(model.n_states), repeat=len(symbols))))
    p = model.pi[paths[:, 0]] * model.b[paths[:, 0], symbols[0]]
    for t in range(1, len(symbols)):
        p = p * model.a[paths[:, t - 1], paths[:, t]] * model.b[paths[:, t], symbols[t]]
    return float(p.sum())


class TestValidateModel:

    def test_valid_model(self, toy_model):
        result = validate_model(toy_model)
        assert result.ok
        assert result.violations == ()

    def test_row_that_does_not_sum_to_one(self):
        model = HmmModel(pi=[1.0, 0.0], a=[[0.5, 0.5], [0.3, 0.3]], b=[[1.0], [1.0]])
        result = validate_model(model)
        assert not result.ok
        assert any("row 1 of a" in v for v in result.violations)

    def test_negative_entry_and_bad_pi(self):
        model = HmmModel(pi=[0.7, 0.7], a=[[1.2, -0.2], [0.0, 1.0]], b=[[1.0], [1.0]])
        violations = validate_model(model).violations
        assert any("entry (0,1) of a" in v for v in violations)
        assert any("pi sums to" in v for v in violations)

    def test_shape_mismatch(self):
        model = HmmModel(pi=[1.0, 0.0], a=[[1.0]], b=[[1.0], [1.0]])
        assert not validate_model(model).ok

    def test_require_valid_raises_with_violations(self):
        model = HmmModel(pi=[0.5, 0.6], a=[[1.0, 0.0], [0.0, 1.0]], b=[[1.0], [1.0]], name="bad")
        with pytest.raises(ModelValidationError) as excinfo:
            require_valid(model)
        assert excinfo.value.violations
        assert "bad" in str(excinfo.value)

    def test_model_arrays_are_read_only(self, toy_model):
        with pytest.raises(ValueError):
            toy_model.a[0, 0] = 0.0


class TestForward:

    def test_matches_path_enumeration(self, rng):
        for _ in range(100):
            n_states, n_symbols = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            model = random_model(rng, n_states, n_symbols)
            symbols = [int(s) for s in rng.integers(0, n_symbols, size=int(rng.integers(1, 9)))]
            npt.assert_allclose(
                math.exp(sequence_log_prob(model, symbols)), brute_force_prob(model, symbols), rtol=1e-12
            )

    def test_total_probability_over_random_models(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            model = random_model(rng, int(rng.integers(1, 4)), 2)
            total = sum(math.exp(sequence_log_prob(model, seq)) for seq in itertools.product(range(2), repeat=6))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_probabilities_of_all_sequences_sum_to_one(self, toy_model):
        total = sum(
            math.exp(sequence_log_prob(toy_model, seq))
            for seq in itertools.product(range(toy_model.n_symbols), repeat=3)
        )
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_step_by_step_equals_fold(self, toy_model):
        symbols = [0, 2, 1, 1, 0, 2]
        state = forward_init(toy_model, symbols[0])
        for symbol in symbols[1:]:
            state = forward_step(state, toy_model, symbol)
        assert state.t == len(symbols)
        assert state.log_prob == forward_fold(toy_model, symbols).log_prob

    def test_log_prob_never_increases(self, rng):
        model = random_model(rng, 4, 3)
        state = forward_init(model, 0)
        for symbol in rng.integers(0, 3, size=50):
            previous = state.log_prob
            state = forward_step(state, model, int(symbol))
            assert state.log_prob <= previous
        npt.assert_allclose(state.alpha_hat.sum(), 1.0)

    def test_long_sequence_does_not_underflow(self, toy_model):
        log_prob = sequence_log_prob(toy_model, [0, 1, 2] * 400)
        assert math.isfinite(log_prob)
        assert log_prob < -500

    def test_impossible_symbol_gives_minus_inf_and_stays(self):
        model = chain_model([0, 0, 1], 3, "chain")
        state = forward_fold(model, [0, 2])
        assert state.is_impossible
        state = forward_step(state, model, 0)
        assert state.log_prob == -math.inf
        assert state.t == 3

    def test_out_of_alphabet(self, toy_model):
        with pytest.raises(OutOfAlphabetError):
            forward_init(toy_model, 3)
        with pytest.raises(OutOfAlphabetError):
            sequence_log_prob(toy_model, [0, -1])

    def test_empty_sequence(self, toy_model):
        with pytest.raises(EmptySequenceError):
            sequence_log_prob(toy_model, [])

    def test_batch_scoring(self, toy_model):
        scores = sequence_log_probs(toy_model, [[0], [1, 2]])
        assert scores.shape == (2,)
        assert scores[1] == sequence_log_prob(toy_model, [1, 2])


class TestSampleSequence:

    def test_deterministic_given_seed(self, toy_model):
        first = sample_sequence(toy_model, 20, seed=7)
        second = sample_sequence(toy_model, 20, seed=7)
        assert first.symbols == second.symbols
        assert first.timestamps == [float(i) for i in range(20)]

    def test_symbols_in_alphabet(self, toy_model):
        seq = sample_sequence(toy_model, 100, seed=1)
        assert len(seq) == 100
        assert all(0 <= s < toy_model.n_symbols for s in seq.symbols)

    def test_chain_model_reproduces_its_sequence(self):
        model = chain_model([0, 2, 1], 3, "chain")
        assert sample_sequence(model, 5, seed=3).symbols == [0, 2, 1, 1, 1]

    def test_symbol_frequencies_follow_the_emissions(self):
        model = HmmModel(pi=[1.0], a=[[1.0]], b=[[0.3, 0.7]])
        draws = [sample_sequence(model, 1, seed=seed).symbols[0] for seed in range(10_000)]
        assert draws.count(0) / len(draws) == pytest.approx(0.3, abs=0.02)

    def test_zero_and_negative_length(self, toy_model):
        assert len(sample_sequence(toy_model, 0, seed=0)) == 0
        with pytest.raises(ConfigurationError):
            sample_sequence(toy_model, -1, seed=0)


class TestLeftToRightInit:

    def test_structure(self):
        model = left_to_right_init(6, 8, seed=0, n_chains=2)
        assert validate_model(model).ok
        npt.assert_allclose(model.pi, [0.5, 0, 0, 0.5, 0, 0])
        # no transitions between chains or backwards
        assert np.all(np.tril(model.a, -1) == 0)
        assert model.a[2, 3] == 0.0
        assert model.a[2, 2] == 1.0 and model.a[5, 5] == 1.0

    def test_seed_sequences_shape_emissions(self):
        model = left_to_right_init(3, 4, seed=0, seed_sequences=[[[1, 2, 3], [1, 2, 3]]])
        assert list(np.argmax(model.b, axis=1)) == [1, 2, 3]
        assert validate_model(model).ok

    def test_states_must_divide_into_chains(self):
        with pytest.raises(ConfigurationError):
            left_to_right_init(5, 3, seed=0, n_chains=2)


class TestBaumWelch:

    def test_trace_nondecreasing_without_floor(self):
        rng = np.random.default_rng(99)
        for problem in range(20):
            truth = random_model(rng, 3, 4)
            sequences = [sample_sequence(truth, 15, seed=problem * 100 + k) for k in range(4)]
            init = random_model(rng, 3, 4)
            result = baum_welch_train(
                sequences, init, TrainConfig(max_iterations=30, emission_floor=0.0)
            )
            assert np.all(np.diff(result.trace) >= -1e-9)
            assert validate_model(result.model).ok

    def test_training_improves_held_out_likelihood(self):
        rng = np.random.default_rng(31)
        truth = random_model(rng, 3, 3)
        noise = random_model(rng, 3, 3)
        init = HmmModel(
            pi=0.5 * (truth.pi + noise.pi),
            a=0.5 * (truth.a + noise.a),
            b=0.5 * (truth.b + noise.b),
        )
        training = [sample_sequence(truth, 20, seed=s) for s in range(50)]
        held_out = [sample_sequence(truth, 20, seed=1000 + s) for s in range(50)]
        result = baum_welch_train(training, init, TrainConfig(max_iterations=50))
        assert result.final_log_likelihood >= result.initial_log_likelihood
        assert sequence_log_probs(result.model, held_out).sum() > sequence_log_probs(init, held_out).sum()

    def test_trace_ends_with_returned_model(self, toy_model):
        sequences = [sample_sequence(toy_model, 12, seed=s) for s in range(5)]
        result = baum_welch_train(sequences, left_to_right_init(2, 3, seed=0), TrainConfig(max_iterations=10))
        total = sum(sequence_log_prob(result.model, seq) for seq in sequences)
        assert result.final_log_likelihood == pytest.approx(total, rel=1e-9)
        assert len(result.trace) == result.iterations + 1

    def test_emission_floor_keeps_all_emissions_positive(self):
        sequences = [[0, 0, 1, 1]] * 3
        result = baum_welch_train(
            sequences, left_to_right_init(2, 4, seed=0), TrainConfig(emission_floor=1e-3)
        )
        assert result.model.b.min() > 0.0
        assert validate_model(result.model).ok

    def test_learns_a_deterministic_chain(self):
        sequences = [[2, 2, 2, 2]] * 5
        init = left_to_right_init(4, 8, seed=0, seed_sequences=[sequences])
        result = baum_welch_train(sequences, init, TrainConfig(emission_floor=0.0))
        assert result.final_log_likelihood > result.initial_log_likelihood
        assert sequence_log_prob(result.model, [2, 2, 2, 2]) == pytest.approx(0.0, abs=1e-3)

    def test_unreached_state_rows_reset_to_uniform(self):
        init = HmmModel(
            pi=[0.5, 0.5, 0.0],
            a=[[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]],
            b=[[0.6, 0.4], [0.3, 0.7], [0.5, 0.5]],
        )
        result = baum_welch_train([[0, 1, 0, 1]], init, TrainConfig(max_iterations=1, emission_floor=0.0))
        assert ("a", 2) in result.reset_rows
        assert ("b", 2) in result.reset_rows
        npt.assert_allclose(result.model.a[2], [1 / 3, 1 / 3, 1 / 3])

    def test_empty_training_set(self, toy_model):
        with pytest.raises(TrainingDataError):
            baum_welch_train([], toy_model)
        with pytest.raises(TrainingDataError):
            baum_welch_train([[0, 1], []], toy_model)

    def test_out_of_alphabet_training_symbol(self, toy_model):
        with pytest.raises(OutOfAlphabetError):
            baum_welch_train([[0, 5]], toy_model)

    def test_zero_probability_sequence_is_reported_without_floor(self):
        init = chain_model([0, 1], 2, "chain")
        with pytest.raises(TrainingDataError):
            baum_welch_train([[1, 1]], init, TrainConfig(emission_floor=0.0))

    def test_floor_makes_any_sequence_trainable(self):
        init = chain_model([0, 1], 2, "chain")
        result = baum_welch_train([[1, 1]], init, TrainConfig(emission_floor=1e-3))
        assert np.isfinite(result.initial_log_likelihood)
        assert result.final_log_likelihood > result.initial_log_likelihood
        assert validate_model(result.model).ok

    def test_invalid_config(self, toy_model):
        with pytest.raises(ConfigurationError):
            baum_welch_train([[0]], toy_model, TrainConfig(max_iterations=0))
        with pytest.raises(ConfigurationError):
            baum_welch_train([[0]], toy_model, TrainConfig(emission_floor=0.5))
