"""Wright and KCBS expressions: classical bounds and quantum values.

Classical bounds come from exhaustive enumeration of deterministic
assignments to the five questions. The Wright enumeration keeps the
exclusivity constraint (no two neighbours both yes); the KCBS enumeration
assigns +1/-1 freely, as a noncontextual model may.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .core import TOL_CONSTRUCT, TOL_PHYSICS, Pentagram, State, born_probability
from .sequential import JointDistribution, kcbs_run

WRIGHT_CLASSICAL_BOUND = 2
KCBS_CLASSICAL_BOUND = -3


class ExclusivityWarning(UserWarning):
    """A pentagram used for a KCBS value is not cyclically exclusive."""


@dataclass(frozen=True)
class ClassicalStrategy:
    """Mixture of classical states 0..4 and the set of states answering yes to each question."""

    answer_sets: tuple
    state_weights: tuple

    def __post_init__(self):
        sets = tuple(frozenset(int(k) for k in s) for s in self.answer_sets)
        weights = tuple(float(w) for w in self.state_weights)
        if len(sets) != 5:
            raise ValueError("a strategy answers exactly five questions")
        if len(weights) != 5:
            raise ValueError("a strategy mixes exactly five classical states")
        if any(k not in range(5) for s in sets for k in s):
            raise ValueError("classical states are labelled 0..4")
        for i in range(5):
            if sets[i] & sets[(i + 1) % 5]:
                raise ValueError(
                    f"answer sets {i} and {(i + 1) % 5} overlap; adjacent questions "
                    "must be exclusive")
        if min(weights) < 0 or abs(sum(weights) - 1.0) > TOL_CONSTRUCT:
            raise ValueError("state weights must be a probability vector")
        object.__setattr__(self, "answer_sets", sets)
        object.__setattr__(self, "state_weights", weights)

    @classmethod
    def reference(cls) -> "ClassicalStrategy":
        """Uniform mixture with questions "0 or 1?", "2 or 3?", "0 or 4?", "1 or 2?", "3 or 4?"."""
        return cls(({0, 1}, {2, 3}, {0, 4}, {1, 2}, {3, 4}), (0.2,) * 5)

    @classmethod
    def deterministic(cls, answer_sets, state: int) -> "ClassicalStrategy":
        weights = [0.0] * 5
        weights[state] = 1.0
        return cls(answer_sets, weights)

    def answers(self) -> np.ndarray:
        """``answers[k, i]`` is +1 when classical state ``k`` says yes to question ``i``."""
        return np.array([[1 if k in s else -1 for s in self.answer_sets] for k in range(5)])


@dataclass(frozen=True)
class BoundReport:
    bound_value: int
    attaining_assignment: tuple
    search_space_size: int
    all_attaining: tuple
    description: str

    def to_json(self) -> dict:
        return {
            "bound_value": self.bound_value,
            "attaining_assignment": list(self.attaining_assignment),
            "search_space_size": self.search_space_size,
            "all_attaining": [list(a) for a in self.all_attaining],
            "description": self.description,
        }


def wright_count(assignment) -> int:
    return int(sum(assignment))


def kcbs_sum(assignment) -> int:
    return int(sum(assignment[i] * assignment[(i + 1) % 5] for i in range(5)))


def _adjacent_exclusive(assignment) -> bool:
    return not any(assignment[i] and assignment[(i + 1) % 5] for i in range(5))


def classical_wright_bound() -> BoundReport:
    """Largest number of yes answers among exclusive 0/1 assignments."""
    # bit i of the mask is the answer to question i
    space = [tuple((mask >> i) & 1 for i in range(5)) for mask in range(32)]
    feasible = [a for a in space if _adjacent_exclusive(a)]
    best = max(wright_count(a) for a in feasible)
    attaining = tuple(a for a in feasible if wright_count(a) == best)
    yes = [i for i, x in enumerate(attaining[0]) if x]
    return BoundReport(best, attaining[0], len(space), attaining,
                       f"yes to questions {yes}, no elsewhere")


def classical_kcbs_bound() -> BoundReport:
    """Smallest ``sum a_i a_{i+1}`` over all ``a`` in {-1,+1}^5."""
    space = [tuple(-1 if (mask >> i) & 1 else 1 for i in range(5)) for mask in range(32)]
    best = min(kcbs_sum(a) for a in space)
    attaining = tuple(a for a in space if kcbs_sum(a) == best)
    return BoundReport(best, attaining[0], len(space), attaining,
                       "four anticorrelated edges and one correlated edge")


def classical_wright_value(strategy: ClassicalStrategy) -> float:
    yes = strategy.answers() > 0
    return float(np.asarray(strategy.state_weights) @ yes.sum(axis=1))


def classical_yes_probabilities(strategy: ClassicalStrategy) -> np.ndarray:
    yes = (strategy.answers() > 0).astype(float)
    return np.asarray(strategy.state_weights) @ yes


def classical_strategy_kcbs(strategy: ClassicalStrategy):
    """Exact edge correlations ``<Q_i Q_{i+1}>`` of the mixture and their sum."""
    a = strategy.answers()
    w = np.asarray(strategy.state_weights)
    edges = tuple(float(w @ (a[:, i] * a[:, (i + 1) % 5])) for i in range(5))
    return edges, float(sum(edges))


def classical_joint_distribution(strategy: ClassicalStrategy, first: int,
                                 second: int) -> JointDistribution:
    """Outcome statistics of asking ``first`` then ``second`` on the classical mixture.

    Classical answers are predetermined, so the order does not matter.
    """
    a = strategy.answers()
    w = np.asarray(strategy.state_weights)
    x, y = a[:, first % 5], a[:, second % 5]
    probs = [w[(x == 1) & (y == 1)].sum(), w[(x == 1) & (y == -1)].sum(),
             w[(x == -1) & (y == 1)].sum(), w[(x == -1) & (y == -1)].sum()]
    return JointDistribution.from_probs(probs, first % 5, second % 5)


def enumerate_deterministic_strategies():
    """Every exclusivity-respecting answer pattern (yes sets) for a single classical state."""
    for a in itertools.product((0, 1), repeat=5):
        if _adjacent_exclusive(a):
            yield a


def wright_value(state: State, pentagram: Pentagram) -> float:
    return float(sum(born_probability(state, q) for q in pentagram))


def kcbs_value(state: State, pentagram: Pentagram) -> float:
    """Sum of the five forward edge correlations of the ideal sequential statistics."""
    worst = pentagram.max_adjacent_overlap()
    if worst > TOL_PHYSICS:
        warnings.warn(f"pentagram is not cyclically exclusive (max overlap {worst:.3e})",
                      ExclusivityWarning, stacklevel=2)
    return kcbs_run(state, pentagram, "forward").kappa
