import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_unit
from qutritlab import kernels
from qutritlab.core import Question, StateVector
from qutritlab.core import Pentagram
from qutritlab.inequalities import kcbs_value, wright_value
from qutritlab.sequential import joint_distribution

pure = kernels.pure
needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="extension not built")


def test_n_params():
    assert pure.n_params(3) == 16
    assert pure.n_params(8) == 76


@pytest.mark.parametrize("dim", [3, 4])
def test_decode_gives_chained_orthogonal_units(dim):
    rng = np.random.default_rng(dim)
    psi, vecs = pure.decode(rng.uniform(0, 6.3, pure.n_params(dim)), dim)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    for i in range(4):
        assert abs(np.linalg.norm(vecs[i]) - 1) < 1e-12
        assert abs(np.vdot(vecs[i], vecs[i + 1])) < 1e-12


def test_repair_closure_projects_last_vector():
    rng = np.random.default_rng(1)
    _, vecs = pure.decode(rng.uniform(0, 6.3, 16), 3)
    fixed, raw_ov2 = pure.repair_closure(vecs)
    assert abs(np.vdot(fixed[4], fixed[0])) < 1e-12
    assert abs(np.vdot(fixed[4], fixed[3])) < 1e-12
    assert raw_ov2 == pytest.approx(abs(np.vdot(vecs[4], vecs[0])) ** 2)


@pytest.mark.parametrize("target", [kernels.WRIGHT, kernels.KCBS])
def test_objective_matches_library_values(target):
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.uniform(0, 6.3, 16)
        psi, vecs = pure.decode(x, 3)
        fixed, _ = pure.repair_closure(vecs)
        if fixed is None:
            continue
        pent = Pentagram.from_vectors(fixed, psi, check=False)
        penalty_term = 5.0 * abs(np.vdot(vecs[4], vecs[0])) ** 2
        if target == kernels.WRIGHT:
            expect = -wright_value(pent.test_state, pent)
        else:
            expect = kcbs_value(pent.test_state, pent)
        got = pure.pentagon_objective(x, 3, target, 5.0)
        assert got == pytest.approx(expect + penalty_term, abs=1e-12)


def test_batch_joint_matches_sequential():
    rng = np.random.default_rng(2)
    states = np.array([random_unit(rng) for _ in range(40)])
    a = np.array([random_unit(rng) for _ in range(40)])
    b = np.array([random_unit(rng) for _ in range(40)])
    for backend in filter(None, (pure, kernels.compiled)):
        out = backend.batch_joint(states, a, b)
        for k in range(40):
            jd = joint_distribution(StateVector(states[k]), Question(StateVector(a[k])),
                                    Question(StateVector(b[k])))
            np.testing.assert_allclose(out[k], jd.as_array(), atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("dim", [3, 4, 5])
def test_backends_agree_on_objective(dim):
    rng = np.random.default_rng(10 + dim)
    for target in (kernels.WRIGHT, kernels.KCBS):
        for _ in range(50):
            x = rng.uniform(0, 6.3, pure.n_params(dim))
            assert kernels.compiled.pentagon_objective(x, dim, target, 40.0) == pytest.approx(
                pure.pentagon_objective(x, dim, target, 40.0), abs=1e-12)


@needs_compiled
def test_backends_reach_same_minimum():
    rng = np.random.default_rng(0)
    x0 = rng.uniform(0, 6.3, 16)
    _, fc, _ = kernels.compiled.minimize_pentagon(x0, 3, kernels.KCBS, 10.0, 0.3, 5000)
    _, fp, _ = pure.minimize_pentagon(x0, 3, kernels.KCBS, 10.0, 0.3, 5000)
    assert fc == pytest.approx(fp, abs=1e-6)


def test_nelder_mead_on_quadratic():
    x, f, n = pure.nelder_mead(lambda z: float(np.sum((z - 1.5) ** 2)), np.zeros(4), 0.5, 4000)
    np.testing.assert_allclose(x, 1.5, atol=1e-5)
    assert n <= 4000


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, QUTRITLAB_PURE="1")
    code = ("from qutritlab import kernels; from qutritlab.optimize import maximize_violation;"
            "r = maximize_violation('wright', budget=1, warm_start=True, max_evals=200);"
            "print(kernels.BACKEND, r.best_value)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out[0] == "python"
    assert float(out[1]) >= 5 ** 0.5 - 1e-9


def test_dimension_above_compiled_limit_uses_pure():
    assert kernels.for_dimension(9) is pure
