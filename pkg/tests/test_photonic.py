import math

import numpy as np
import pytest

from conftest import random_unit
from qutritlab.core import StateVector, pentagram_constants
from qutritlab.photonic import (
    HA,
    HB,
    INTERNAL_HWP_DEG,
    INTERNAL_QWP_DEG,
    LOSS_MODE,
    QUESTION_ANGLES_DEG,
    VB,
    OpticalElement,
    build_device,
    cascade,
    device_for_question,
    effective_eigenvector,
    encode,
    fidelity_table,
    hwp_transfer,
    mode_transfer,
    pbs_transfer,
    propagate,
    qwp_transfer,
    solve_internal_settings,
    verify_device,
)
from qutritlab.sequential import edge_pairs, joint_distribution, slot_probabilities


def test_wave_plates():
    np.testing.assert_allclose(hwp_transfer(0), np.diag([1, -1]), atol=1e-15)
    np.testing.assert_allclose(qwp_transfer(0), np.diag([1, 1j]), atol=1e-15)
    np.testing.assert_allclose(hwp_transfer(45), [[0, 1], [1, 0]], atol=1e-15)
    for angle in (0, 13, 45, 117):
        for m in (hwp_transfer(angle), qwp_transfer(angle)):
            np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(qwp_transfer(30) @ qwp_transfer(30), hwp_transfer(30), atol=1e-14)


def test_mode_transfer_is_permutation():
    t = mode_transfer()
    expect = np.zeros((4, 4))
    expect[HA, HB] = expect[HB, VB] = expect[VB, HA] = expect[LOSS_MODE, LOSS_MODE] = 1
    np.testing.assert_allclose(np.abs(t), expect, atol=1e-12)
    p = pbs_transfer()
    np.testing.assert_allclose(p.conj().T @ p, np.eye(4), atol=1e-14)


def test_frozen_internal_angles_match_solve():
    solved = solve_internal_settings()
    assert solved.angles_deg[0] == pytest.approx(INTERNAL_QWP_DEG, abs=1e-9)
    assert solved.angles_deg[1] == pytest.approx(INTERNAL_HWP_DEG, abs=1e-9)
    assert solved.worst_fidelity >= 1 - 1e-12


def test_internal_angles_closed_form():
    r = pentagram_constants()["r"]
    assert INTERNAL_QWP_DEG == pytest.approx(math.degrees(math.atan(r)), abs=1e-9)
    assert INTERNAL_HWP_DEG == pytest.approx(math.degrees(math.atan(r)) / 2, abs=1e-9)


def test_question_angle_closed_form(pentagram):
    # theta = 45 deg + phi / 2, phi the azimuth of v_i
    for i, theta in enumerate(QUESTION_ANGLES_DEG):
        v = pentagram[i].vector.real
        phi = math.degrees(math.atan2(v[1], v[0])) % 360
        assert (45 + phi / 2) % 180 == pytest.approx(theta, abs=1e-9)


def test_device_fidelities(pentagram):
    for i, theta, fid in fidelity_table():
        assert fid >= 1 - 1e-6
        assert theta == QUESTION_ANGLES_DEG[i]
        dev = device_for_question(i)
        assert dev.isometry_defect() <= 1e-12
        vec, sv = effective_eigenvector(dev)
        assert abs(np.vdot(vec, pentagram[i].vector)) == pytest.approx(1, abs=1e-12)
        np.testing.assert_allclose(sv, [1, 0, 0], atol=1e-12)


def test_device_branches_are_luders_projections(pentagram):
    rng = np.random.default_rng(4)
    for i in range(5):
        dev = device_for_question(i)
        prompt, late = dev.branch_maps()
        proj = pentagram[i].projector
        np.testing.assert_allclose(prompt[:3], np.eye(3) - proj, atol=1e-12)
        np.testing.assert_allclose(np.abs(late[:3]), np.abs(proj), atol=1e-12)
        assert np.max(np.abs(prompt[LOSS_MODE])) < 1e-12
        psi = random_unit(rng)
        out = dev.apply(encode(psi))
        assert out.loss() == pytest.approx(0, abs=1e-12)
        assert np.sum(np.abs(out.bin(dev.delay_ns)) ** 2) == pytest.approx(
            np.vdot(psi, proj @ psi).real, abs=1e-12)


def test_wrong_internal_angles_fail_verification(pentagram):
    dev = build_device(45.0, internal=(30.0, 10.0))
    rep = verify_device(dev, pentagram[0])
    assert not rep.passed


def test_cascade_equals_sequential(pentagram):
    psi = pentagram.test_state
    worst = 0.0
    for order in ("forward", "reverse"):
        for i, j in edge_pairs(order):
            first = device_for_question(i, delay_ns=50)
            second = device_for_question(j, delay_ns=100)
            res = cascade(first, second, encode(psi))
            ideal = slot_probabilities(joint_distribution(psi, pentagram[i], pentagram[j]))
            worst = max(worst, np.max(np.abs(res.slot_probabilities - ideal)))
            assert res.loss == pytest.approx(0, abs=1e-12)
    assert worst <= 1e-9


def test_cascade_random_states(pentagram):
    rng = np.random.default_rng(9)
    first = device_for_question(1, delay_ns=50)
    second = device_for_question(2, delay_ns=100)
    for _ in range(20):
        psi = random_unit(rng)
        res = cascade(first, second, encode(psi))
        ideal = slot_probabilities(joint_distribution(StateVector(psi), pentagram[1], pentagram[2]))
        np.testing.assert_allclose(res.slot_probabilities, ideal, atol=1e-9)


def test_cascade_requires_doubled_delay():
    d = device_for_question(0, delay_ns=50)
    with pytest.raises(ValueError):
        cascade(d, device_for_question(1, delay_ns=50), encode([0, 0, 1]))


def test_device_inverse_undoes_device():
    dev = device_for_question(3)
    state = encode(random_unit(np.random.default_rng(1)))
    back = propagate(dev.inverse().elements, propagate(dev.without_delay(), state))
    np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-12)


def test_delay_moves_only_hb():
    state = encode(np.array([0.6, 0.0, 0.8]))
    out = propagate([OpticalElement("delay", "b", delay_ns=50)], state)
    assert out.delays == (0.0, 50.0)
    assert abs(out.bin(50.0)[HB]) == pytest.approx(0.6)
    assert abs(out.bin(0.0)[HA]) == pytest.approx(0.8)


def test_device_json():
    data = device_for_question(0).to_json()
    assert data["theta_deg"] == 45.0
    kinds = [e["kind"] for e in data["elements"]]
    assert kinds.count("delay") == 1 and kinds[0] == "hwp"


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_device(45.0, delay_ns=0)
    with pytest.raises(ValueError):
        OpticalElement("lens").matrix()
    with pytest.raises(ValueError):
        encode([1, 0])
