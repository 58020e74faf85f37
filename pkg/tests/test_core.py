import json
import math

import numpy as np
import pytest

from conftest import SQRT5, random_unit, umbrella_vectors
from qutritlab.core import (
    ConditioningError,
    DensityMatrix,
    InvalidStateError,
    Pentagram,
    Question,
    StateVector,
    born_probability,
    check_exclusive,
    expectation,
    luders_update,
    make_pentagram,
    outcome_probability,
    pentagram_constants,
    rotate_toward,
)


def test_pentagram_matches_umbrella_construction(pentagram):
    np.testing.assert_allclose(pentagram.vectors(), umbrella_vectors(), atol=1e-14)


def test_pentagram_cyclic_orthogonality_and_norms(pentagram):
    for i in range(5):
        assert abs(np.linalg.norm(pentagram[i].vector) - 1) <= 1e-12
        assert abs(np.vdot(pentagram[i].vector, pentagram[i + 1].vector)) <= 1e-10


def test_pentagram_yes_probabilities(pentagram):
    psi = pentagram.test_state
    for q in pentagram:
        assert born_probability(psi, q) == pytest.approx(1 / SQRT5, abs=1e-12)
    assert sum(born_probability(psi, q) for q in pentagram) == pytest.approx(SQRT5, abs=1e-9)


def test_pentagram_constants_orthogonality_condition():
    k = pentagram_constants()
    # neighbouring vectors are orthogonal iff cos(4 pi / 5) + r^2 = 0
    assert k["c"] + k["r"] ** 2 == pytest.approx(0, abs=1e-15)
    assert k["N"] == pytest.approx(1 / math.sqrt(1 + math.cos(math.pi / 5)))


def test_pentagram_index_wraps(pentagram):
    assert pentagram[5] is pentagram[0]
    assert pentagram[-1] is pentagram[4]


def test_pentagram_rejects_non_exclusive():
    vecs = umbrella_vectors()
    vecs[1] = vecs[0]
    with pytest.raises(ValueError, match="not exclusive"):
        Pentagram.from_vectors(vecs, [0, 0, 1])
    assert Pentagram.from_vectors(vecs, [0, 0, 1], check=False).max_adjacent_overlap() == pytest.approx(1)


def test_pentagram_json_roundtrip(pentagram):
    text = pentagram.dumps()
    back = Pentagram.from_json(json.loads(text))
    np.testing.assert_array_equal(back.vectors(), pentagram.vectors())
    np.testing.assert_array_equal(back.test_state.amplitudes, pentagram.test_state.amplitudes)


def test_state_vector_validation():
    with pytest.raises(InvalidStateError):
        StateVector([1.0, 1.0, 0.0])
    with pytest.raises(InvalidStateError):
        StateVector.normalized([0, 0, 0])
    with pytest.raises(InvalidStateError):
        StateVector([1.0])
    s = StateVector.normalized([1, 1j, 0])
    assert s.dim == 3
    assert abs(np.linalg.norm(s.amplitudes) - 1) <= 1e-12
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


def test_state_same_ray_ignores_global_phase():
    a = StateVector.normalized([1, 2j, 3])
    b = StateVector(a.amplitudes * np.exp(0.7j))
    assert a.same_ray(b)
    assert StateVector.from_json(a.to_json()).same_ray(a)


def test_density_matrix_validation():
    with pytest.raises(InvalidStateError, match="Hermitian"):
        DensityMatrix([[0.5, 0.1], [0.3, 0.5]])
    with pytest.raises(InvalidStateError, match="trace"):
        DensityMatrix(np.eye(3))
    with pytest.raises(InvalidStateError, match="negative"):
        DensityMatrix([[1.5, 0], [0, -0.5]])
    rho = DensityMatrix.mixture([StateVector([1, 0, 0]), StateVector([0, 0, 1])], [0.25, 0.75])
    assert rho.purity() == pytest.approx(0.625)


def test_born_and_luders_against_matrices():
    rng = np.random.default_rng(3)
    for _ in range(50):
        psi = random_unit(rng)
        v = random_unit(rng)
        q = Question(StateVector(v))
        proj = np.outer(v, v.conj())
        assert born_probability(StateVector(psi), q) == pytest.approx(
            np.vdot(psi, proj @ psi).real, abs=1e-14)
        post = luders_update(StateVector(psi), q, -1)
        expect = (np.eye(3) - proj) @ psi
        expect /= np.linalg.norm(expect)
        assert post.overlap(StateVector(expect)) == pytest.approx(1, abs=1e-12)
        rho = StateVector(psi).density_matrix()
        post_rho = luders_update(rho, q, +1)
        np.testing.assert_allclose(post_rho.entries, proj, atol=1e-12)


def test_conditioning_on_impossible_outcome(pentagram):
    with pytest.raises(ConditioningError):
        luders_update(pentagram[0].eigenvector, pentagram[1], +1)
    assert outcome_probability(pentagram[0].eigenvector, pentagram[1], -1) == pytest.approx(1)
    with pytest.raises(ValueError):
        outcome_probability(pentagram.test_state, pentagram[0], 0)


def test_expectation_of_observable(pentagram):
    psi = pentagram.test_state
    q = pentagram[2]
    direct = np.vdot(psi.amplitudes, q.observable @ psi.amplitudes).real
    assert expectation(psi, q) == pytest.approx(direct, abs=1e-14)


def test_check_exclusive(pentagram):
    ok, ov = check_exclusive(pentagram[0], pentagram[1])
    assert ok and ov <= 1e-10
    ok, ov = check_exclusive(pentagram[0], pentagram[2])
    assert not ok and ov > 0.1


def test_rotate_toward_stays_in_plane(pentagram):
    eps = 0.06
    q = rotate_toward(pentagram[0], pentagram[1], eps)
    v0, v1 = pentagram[0].vector, pentagram[1].vector
    assert abs(np.vdot(v0, q.vector)) == pytest.approx(math.cos(eps), abs=1e-14)
    assert abs(np.vdot(v1, q.vector)) == pytest.approx(math.sin(eps), abs=1e-14)
    assert q.index == 0
    assert rotate_toward(pentagram[0], pentagram[0], 0.3) is pentagram[0]


def test_make_pentagram_test_state():
    p = make_pentagram()
    np.testing.assert_array_equal(p.test_state.amplitudes, [0, 0, 1])
