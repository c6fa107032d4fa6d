"""
Normalizer tables: the most likely observation sequence of every length.

The table is computed by depth-first search over symbol prefixes, carrying
the forward state down the tree. Because a prefix's probability bounds the
probability of all of its extensions, a subtree is skipped once its root is
strictly below the best value already found at every deeper length. A single
traversal fills the maxima for all lengths 1 ... t_max.
"""

import logging
import math
from typing import List, Optional, Tuple

from .config import DEFAULT_NODE_BUDGET
from .errors import NodeBudgetExceededError, ValidationError, WitnessMismatchError
from .hmm import forward_fold, forward_init, forward_step, require_valid
from .models import ForwardState, HmmModel, NormalizerTable

logger = logging.getLogger(__name__)

WITNESS_TOLERANCE = 1e-12


def _worst_case_nodes(n_symbols: int, t_max: int) -> int:
    return sum(n_symbols ** t for t in range(1, t_max + 1))


def _search(
    model: HmmModel,
    t_max: int,
    budget: int,
    best: List[float],
    witnesses: List[Optional[Tuple[int, ...]]],
) -> int:
    """Run the pruned DFS, updating best/witnesses in place; return nodes visited."""
    n_symbols = model.n_symbols
    visited = 0
    # stack entries: (forward state, prefix)
    stack: List[Tuple[ForwardState, Tuple[int, ...]]] = []

    def expand(children: List[Tuple[ForwardState, Tuple[int, ...]]]) -> None:
        # most probable child on top of the stack, ties broken by lower symbol
        children.sort(key=lambda item: (-item[0].log_prob, item[1]))
        stack.extend(reversed(children))

    def visit(state: ForwardState, prefix: Tuple[int, ...]) -> None:
        nonlocal visited
        visited += 1
        if visited > budget:
            raise NodeBudgetExceededError(_worst_case_nodes(n_symbols, t_max), budget)
        depth = len(prefix)
        current = best[depth - 1]
        if state.log_prob > current or (
            state.log_prob == current
            and (witnesses[depth - 1] is None or prefix < witnesses[depth - 1])
        ):
            best[depth - 1] = state.log_prob
            witnesses[depth - 1] = prefix

    roots = []
    for symbol in range(n_symbols):
        state = forward_init(model, symbol)
        visit(state, (symbol,))
        roots.append((state, (symbol,)))
    expand(roots)

    while stack:
        state, prefix = stack.pop()
        depth = len(prefix)
        if depth >= t_max or state.is_impossible:
            continue
        if state.log_prob < min(best[depth:]):
            continue
        children = []
        for symbol in range(n_symbols):
            child = forward_step(state, model, symbol)
            child_prefix = prefix + (symbol,)
            visit(child, child_prefix)
            children.append((child, child_prefix))
        expand(children)

    return visited


def build_normalizer_table(
    model: HmmModel, t_max: int, budget: int = DEFAULT_NODE_BUDGET
) -> NormalizerTable:
    """
    Compute max over O_1:t of log P(O_1:t | lambda) for t = 1 ... t_max.

    Args:
        model: A valid HMM.
        t_max: Longest prefix length to tabulate.
        budget: Maximum number of prefixes the search may evaluate.

    Returns:
        NormalizerTable with exact per-length maxima and the witness sequences.

    Raises:
        NodeBudgetExceededError: If the search needs more nodes than budget.
    """
    if t_max < 1:
        raise ValidationError("t_max must be at least 1.")
    require_valid(model)

    best = [-math.inf] * t_max
    witnesses: List[Optional[Tuple[int, ...]]] = [None] * t_max
    visited = _search(model, t_max, budget, best, witnesses)
    logger.debug("Normalizer for '%s' up to t=%d visited %d nodes", model.name, t_max, visited)
    return _table(model, best, witnesses)


def extend_normalizer_table(
    table: NormalizerTable, model: HmmModel, new_t_max: int, budget: int = DEFAULT_NODE_BUDGET
) -> NormalizerTable:
    """
    Extend a table to a longer horizon with the same exactness.

    The known maxima seed the search bounds, so the extension only explores
    prefixes that can still matter.
    """
    if new_t_max <= table.t_max:
        raise ValidationError(
            f"new_t_max {new_t_max} must exceed the current t_max {table.t_max}."
        )
    require_valid(model)

    best = list(table.max_log_prob) + [-math.inf] * (new_t_max - table.t_max)
    witnesses: List[Optional[Tuple[int, ...]]] = [None] * new_t_max
    for index, witness in enumerate(table.argmax_by_length):
        witnesses[index] = tuple(witness)
    visited = _search(model, new_t_max, budget, best, witnesses)
    logger.info(
        "Extended normalizer for '%s' from t=%d to t=%d (%d nodes)",
        model.name, table.t_max, new_t_max, visited,
    )
    return _table(model, best, witnesses)


def _table(model: HmmModel, best: List[float], witnesses: List[Optional[Tuple[int, ...]]]) -> NormalizerTable:
    return NormalizerTable(
        model_name=model.name,
        max_log_prob=tuple(float(v) for v in best),
        argmax_sequence=tuple(witnesses[-1]),
        argmax_by_length=tuple(tuple(w) for w in witnesses),
    )


def verify_witness(table: NormalizerTable, model: HmmModel) -> None:
    """
    Check that the table's argmax sequence reproduces its last maximum.

    Raises:
        WitnessMismatchError: If the table was not built from this model.
    """
    if len(table.argmax_sequence) != table.t_max:
        raise WitnessMismatchError(
            f"Normalizer for '{model.name}' has a witness of length {len(table.argmax_sequence)} "
            f"but t_max {table.t_max}."
        )
    reproduced = forward_fold(model, table.argmax_sequence).log_prob
    expected = table.max_log_prob[-1]
    if reproduced == expected:
        return
    if not (math.isfinite(reproduced) and math.isfinite(expected)) or abs(reproduced - expected) > WITNESS_TOLERANCE:
        raise WitnessMismatchError(
            f"Normalizer for '{model.name}' does not match the model: witness scores "
            f"{reproduced!r}, table says {expected!r}."
        )
