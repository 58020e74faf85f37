import math

import numpy as np
import pytest

from conftest import SQRT5, brute_joint, brute_joint_rho, random_unit
from qutritlab.core import DensityMatrix, Question, StateVector, rotate_toward
from qutritlab.sequential import (
    CSV_COLUMNS,
    TIME_SLOTS,
    JointDistribution,
    Outcome,
    correlation,
    edge_pairs,
    joint_distribution,
    kcbs_run,
    marginal_consistency,
    outcome_to_timeslot,
    slot_probabilities,
)

EDGE = 1 - 4 / SQRT5


def test_ideal_edge_joint(pentagram):
    jd = joint_distribution(pentagram.test_state, pentagram[0], pentagram[1])
    np.testing.assert_allclose(jd.as_array(), [0, 1 / SQRT5, 1 / SQRT5, 1 - 2 / SQRT5], atol=1e-12)
    assert correlation(jd) == pytest.approx(EDGE, abs=1e-12)
    assert correlation(jd) == pytest.approx(-0.788854, abs=1e-6)


def test_deterministic_joint(pentagram):
    jd = joint_distribution(pentagram[0].eigenvector, pentagram[0], pentagram[1])
    np.testing.assert_allclose(jd.as_array(), [0, 1, 0, 0], atol=1e-12)
    assert correlation(jd) == pytest.approx(-1, abs=1e-12)


def test_yes_on_middle_question_gives_two_anticorrelated_edges(pentagram):
    run = kcbs_run(pentagram[2].eigenvector, pentagram, "forward")
    assert run.correlations[1] == pytest.approx(-1, abs=1e-12)
    assert run.correlations[2] == pytest.approx(-1, abs=1e-12)


def test_joint_matches_projector_products():
    rng = np.random.default_rng(11)
    for _ in range(100):
        psi, a, b = (random_unit(rng) for _ in range(3))
        jd = joint_distribution(StateVector(psi), Question(StateVector(a)), Question(StateVector(b)))
        np.testing.assert_allclose(jd.as_array(), brute_joint(psi, a, b), atol=1e-12)


def test_joint_on_mixed_state_matches_projector_products():
    rng = np.random.default_rng(12)
    for _ in range(30):
        kets = [random_unit(rng) for _ in range(3)]
        w = rng.dirichlet(np.ones(3))
        rho = DensityMatrix.mixture([StateVector(k) for k in kets], w)
        a, b = random_unit(rng), random_unit(rng)
        jd = joint_distribution(rho, Question(StateVector(a)), Question(StateVector(b)))
        np.testing.assert_allclose(jd.as_array(), brute_joint_rho(rho.entries, a, b), atol=1e-12)


def test_kcbs_ideal_value_and_order_independence(pentagram):
    fwd = kcbs_run(pentagram.test_state, pentagram, "forward")
    rev = kcbs_run(pentagram.test_state, pentagram, "reverse")
    assert fwd.kappa == pytest.approx(5 - 4 * SQRT5, abs=1e-9)
    for c in fwd.correlations:
        assert c == pytest.approx(EDGE, abs=1e-9)
    assert abs(fwd.kappa - rev.kappa) <= 1e-12
    for a, b in zip(fwd.correlations, rev.correlations):
        assert abs(a - b) <= 1e-12


def test_order_matters_for_non_exclusive_questions(pentagram):
    q0 = rotate_toward(pentagram[0], pentagram[1], 0.3)
    psi = StateVector.normalized([0.3, 0.5, 1.0])
    ab = joint_distribution(psi, q0, pentagram[1])
    ba = joint_distribution(psi, pentagram[1], q0)
    assert ab.p_yy > 0
    assert abs(ab.first_marginal() - ba.second_marginal()) > 1e-3


def test_edge_pairs():
    assert edge_pairs("forward") == [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]
    assert edge_pairs("reverse") == [(1, 0), (2, 1), (3, 2), (4, 3), (0, 4)]
    with pytest.raises(ValueError):
        edge_pairs("sideways")


def test_time_slot_map():
    assert outcome_to_timeslot(-1, -1).slot == "t0"
    assert outcome_to_timeslot(+1, -1).slot == "t1"
    assert outcome_to_timeslot(-1, +1).slot == "t2"
    assert outcome_to_timeslot("yes", "yes").slot == "t3"
    assert [s.delay_ns for s in TIME_SLOTS] == [0, 50, 100, 150]


def test_slot_probabilities(pentagram):
    jd = joint_distribution(pentagram.test_state, pentagram[0], pentagram[1])
    np.testing.assert_allclose(slot_probabilities(jd), [jd.p_nn, jd.p_yn, jd.p_ny, jd.p_yy])


def test_joint_distribution_validation():
    with pytest.raises(ValueError):
        JointDistribution(0.5, 0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        JointDistribution(-0.1, 0.6, 0.5, 0.0)
    jd = JointDistribution(0.1, 0.2, 0.3, 0.4, 2, 3)
    s = jd.swapped()
    assert (s.p_yn, s.p_ny, s.first_index, s.second_index) == (0.3, 0.2, 3, 2)
    assert jd.prob(Outcome.YES, Outcome.NO) == 0.2
    assert tuple(jd.to_row()) == CSV_COLUMNS


def test_outcome_coerce():
    assert Outcome.coerce("no") is Outcome.NO
    assert Outcome.coerce(1) is Outcome.YES
    with pytest.raises(ValueError):
        Outcome.coerce(0)


def test_marginal_consistency_on_pentagram(pentagram):
    for i in range(5):
        rep = marginal_consistency(pentagram.test_state, pentagram, i)
        assert rep.discrepancy <= 1e-12
        assert rep.first_alone == pytest.approx(1 / SQRT5)


def test_marginal_inconsistency_when_not_exclusive(pentagram):
    q = list(pentagram)
    q[0] = rotate_toward(q[0], q[1], 0.2)
    from qutritlab.core import Pentagram
    bent = Pentagram(tuple(q), pentagram.test_state, check=False)
    rep = marginal_consistency(StateVector.normalized([1, 0.4, 0.8]), bent, 0)
    assert rep.discrepancy > 1e-3
    assert math.isfinite(rep.discrepancy)
