"""
Shared fixtures: small hand-built models and a trained six-behavior set.
"""

import numpy as np
import pytest

from behavior_hmm.config import BEHAVIOR_NAMES, TrainConfig
from behavior_hmm.harness import train_behavior
from behavior_hmm.models import BehaviorModel, HmmModel, ObservationSequence
from behavior_hmm.normalizer import build_normalizer_table
from behavior_hmm.simulator import get_template


def random_model(rng: np.random.Generator, n_states: int, n_symbols: int, name: str = "") -> HmmModel:
    """Strictly positive random HMM."""
    pi = rng.dirichlet(np.ones(n_states))
    a = rng.dirichlet(np.ones(n_states), size=n_states)
    b = rng.dirichlet(np.ones(n_symbols), size=n_states)
    return HmmModel(pi=pi, a=a, b=b, name=name)


def chain_model(symbols, n_symbols: int, name: str) -> HmmModel:
    """Deterministic left-to-right chain that emits exactly `symbols`, then repeats the last."""
    n = len(symbols)
    pi = np.zeros(n)
    pi[0] = 1.0
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = 1.0
    a[n - 1, n - 1] = 1.0
    b = np.zeros((n, n_symbols))
    for i, symbol in enumerate(symbols):
        b[i, symbol] = 1.0
    return HmmModel(pi=pi, a=a, b=b, name=name)


def make_behavior(model: HmmModel, t_nominal: int) -> BehaviorModel:
    return BehaviorModel(
        name=model.name,
        hmm=model,
        t_nominal=t_nominal,
        normalizer=build_normalizer_table(model, t_nominal),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_model():
    return HmmModel(
        pi=[0.6, 0.4],
        a=[[0.7, 0.3], [0.4, 0.6]],
        b=[[0.5, 0.4, 0.1], [0.1, 0.3, 0.6]],
        name="toy",
    )


@pytest.fixture
def chain_behaviors():
    """Two behaviors that agree on [0, 0, 0] and differ on the fourth symbol."""
    first = make_behavior(chain_model([0, 0, 0, 1], 3, "first"), 4)
    second = make_behavior(chain_model([0, 0, 0, 2], 3, "second"), 4)
    return [first, second]


def ideal_sequences(name: str, per_direction: int = 5):
    template = get_template(name)
    sequences = []
    for direction in ("ccw", "cw"):
        symbols = template.expected_symbols(8, direction)
        sequences += [ObservationSequence(symbols=symbols, label=direction)] * per_direction
    return sequences


@pytest.fixture(scope="session")
def trained_behaviors():
    """All six behaviors trained on their noise-free symbol sequences in both directions."""
    behaviors = []
    for index, name in enumerate(BEHAVIOR_NAMES):
        behavior, _ = train_behavior(name, ideal_sequences(name), train_config=TrainConfig(seed=index))
        behaviors.append(behavior)
    return behaviors
