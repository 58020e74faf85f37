import itertools

import numpy as np
import pytest

from conftest import SQRT5
from qutritlab.core import Pentagram, StateVector
from qutritlab.inequalities import (
    ClassicalStrategy,
    ExclusivityWarning,
    classical_joint_distribution,
    classical_kcbs_bound,
    classical_strategy_kcbs,
    classical_wright_bound,
    classical_wright_value,
    classical_yes_probabilities,
    enumerate_deterministic_strategies,
    kcbs_sum,
    kcbs_value,
    wright_count,
    wright_value,
)
from qutritlab.sequential import correlation


def test_wright_bound_oracle():
    best = max(sum(a) for a in itertools.product((0, 1), repeat=5)
               if all(not (a[i] and a[(i + 1) % 5]) for i in range(5)))
    rep = classical_wright_bound()
    assert rep.bound_value == best == 2
    assert rep.search_space_size == 32
    assert rep.attaining_assignment == (1, 0, 1, 0, 0)
    assert len(rep.all_attaining) == 5
    for a in rep.all_attaining:
        assert wright_count(a) == 2


def test_kcbs_bound_oracle():
    best = min(sum(a[i] * a[(i + 1) % 5] for i in range(5))
               for a in itertools.product((-1, 1), repeat=5))
    rep = classical_kcbs_bound()
    assert rep.bound_value == best == -3
    assert rep.search_space_size == 32
    assert kcbs_sum(rep.attaining_assignment) == -3
    assert (1, -1, 1, -1, -1) in rep.all_attaining
    assert len(rep.all_attaining) == 10


def test_bound_reports_serialize():
    data = classical_kcbs_bound().to_json()
    assert data["bound_value"] == -3 and isinstance(data["attaining_assignment"], list)


def test_deterministic_strategies_are_independent_sets():
    pats = list(enumerate_deterministic_strategies())
    assert len(pats) == 11
    assert max(sum(p) for p in pats) == 2


def test_reference_strategy():
    s = ClassicalStrategy.reference()
    assert classical_wright_value(s) == pytest.approx(2)
    np.testing.assert_allclose(classical_yes_probabilities(s), [0.4] * 5)
    edges, kappa = classical_strategy_kcbs(s)
    assert kappa >= -3 - 1e-12
    assert kappa == pytest.approx(-3)


def test_classical_state_zero_edges():
    s = ClassicalStrategy.deterministic(ClassicalStrategy.reference().answer_sets, 0)
    edges, kappa = classical_strategy_kcbs(s)
    # state 0 answers yes, no, yes, no, no
    assert edges == (-1, -1, -1, 1, -1)
    assert kappa == -3


def test_strategy_validation():
    with pytest.raises(ValueError, match="exclusive"):
        ClassicalStrategy(({0}, {0}, {1}, {2}, {3}), (0.2,) * 5)
    with pytest.raises(ValueError):
        ClassicalStrategy(({0}, {1}, {2}, {3}), (0.25,) * 4)
    with pytest.raises(ValueError):
        ClassicalStrategy(({0}, {1}, {2}, {3}, {4}), (0.5,) * 5)
    with pytest.raises(ValueError):
        ClassicalStrategy(({0}, {1}, {2}, {3}, {7}), (0.2,) * 5)


def test_random_strategies_respect_both_bounds():
    rng = np.random.default_rng(5)
    for _ in range(300):
        sets = []
        for i in range(5):
            sets.append({k for k in range(5) if rng.random() < 0.5})
        # enforce exclusivity by removing conflicts with the previous set
        for i in range(5):
            sets[i] -= sets[(i - 1) % 5]
        s = ClassicalStrategy(sets, rng.dirichlet(np.ones(5)))
        assert classical_wright_value(s) <= 2 + 1e-12
        assert classical_strategy_kcbs(s)[1] >= -3 - 1e-12


def test_classical_joint_matches_edges():
    s = ClassicalStrategy.reference()
    edges, _ = classical_strategy_kcbs(s)
    for i in range(5):
        jd = classical_joint_distribution(s, i, i + 1)
        assert jd.p_yy == 0
        assert correlation(jd) == pytest.approx(edges[i])
        assert correlation(classical_joint_distribution(s, i + 1, i)) == pytest.approx(edges[i])


def test_quantum_values(pentagram):
    assert wright_value(pentagram.test_state, pentagram) == pytest.approx(SQRT5, abs=1e-9)
    assert kcbs_value(pentagram.test_state, pentagram) == pytest.approx(5 - 4 * SQRT5, abs=1e-9)


def test_kcbs_value_warns_without_exclusivity(pentagram):
    vecs = pentagram.vectors().copy()
    vecs[1] = vecs[2]
    bent = Pentagram.from_vectors(vecs, [0, 0, 1], check=False)
    with pytest.warns(ExclusivityWarning):
        kcbs_value(StateVector([0, 0, 1]), bent)
