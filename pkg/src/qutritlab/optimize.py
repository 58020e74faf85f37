"""Multi-start search for the largest quantum violation.

Configurations are a state plus five unit vectors in ``C^d``. Each
``v_{i+1}`` is drawn from the orthogonal complement of ``v_i``, so four of
the five exclusivity constraints hold by construction; the closing one,
``<v4|v0> = 0``, carries a quadratic penalty whose weight grows with the
restart index and is enforced exactly by projecting ``v4`` before every
evaluation. Local search is Nelder-Mead (see :mod:`qutritlab.kernels`).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Pentagram, StateVector, make_pentagram
from .inequalities import kcbs_value, wright_value

TARGETS = {"wright": kernels.WRIGHT, "kcbs": kernels.KCBS}
WRIGHT_QUANTUM_MAX = math.sqrt(5)
KCBS_QUANTUM_MIN = 5 - 4 * math.sqrt(5)
WRIGHT_TOLERANCE = 1e-6
KCBS_TOLERANCE = 1e-5

DEFAULT_RESTARTS = 64
DEFAULT_EVALS = 5000
INITIAL_STEP = 0.3
BASE_PENALTY = 10.0


@dataclass
class OptimizationResult:
    target: str
    dimension: int
    best_value: float
    vectors: np.ndarray
    state: np.ndarray
    iterations: int
    residual: float
    converged: bool
    seed: int
    restarts: int
    restart_values: list = field(default_factory=list, repr=False)

    def pentagram(self) -> Pentagram:
        return Pentagram.from_vectors(self.vectors, self.state, check=False)

    def to_json(self) -> dict:
        def cplx(a):
            return [[z.real, z.imag] for z in np.asarray(a).ravel()]
        return {
            "target": self.target,
            "dimension": self.dimension,
            "best_value": self.best_value,
            "vectors": [cplx(v) for v in self.vectors],
            "state": cplx(self.state),
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "seed": self.seed,
            "restarts": self.restarts,
        }


def _unit_to_angles(u):
    """Inverse of the kernels' unit-vector parameterization (up to global phase)."""
    u = np.asarray(u, dtype=complex)
    m = u.size
    # make the first component real and nonnegative
    if abs(u[0]) > 1e-15:
        u = u * np.exp(-1j * np.angle(u[0]))
    mags = np.abs(u)
    angles = np.zeros(m - 1)
    s = 1.0
    for k in range(m - 1):
        if s < 1e-15:
            break
        angles[k] = math.acos(max(-1.0, min(1.0, mags[k] / s)))
        s *= math.sin(angles[k])
    phases = np.angle(u[1:])
    return np.concatenate([angles, phases])


def encode(state, vectors) -> np.ndarray:
    """Parameters reproducing ``(state, vectors)`` up to phases.

    Requires ``vectors`` to be consecutively orthogonal.
    """
    state = np.asarray(state, dtype=complex)
    vectors = np.asarray(vectors, dtype=complex)
    dim = state.size
    parts = [_unit_to_angles(state), _unit_to_angles(vectors[0])]
    prev = vectors[0]
    for i in range(1, 5):
        basis = kernels.pure.complement_basis(prev)
        coeffs = basis.conj() @ vectors[i]
        parts.append(_unit_to_angles(coeffs / np.linalg.norm(coeffs)))
        # decode rebuilds v_i from the coefficients; follow it so phases chain
        prev = (coeffs / np.linalg.norm(coeffs)) @ basis
    x = np.concatenate(parts)
    assert x.size == kernels.n_params(dim)
    return x


def configuration(x, dim):
    """Decode parameters and apply the closure repair."""
    psi, raw = kernels.decode(x, dim)
    vecs, _ = kernels.repair_closure(raw)
    if vecs is None:
        vecs = raw
    return psi, vecs


def evaluate(target: str, state, vectors) -> float:
    pent = Pentagram.from_vectors(vectors, state, check=False)
    if target == "wright":
        return wright_value(pent.test_state, pent)
    return kcbs_value(pent.test_state, pent)


def _threshold_met(target: str, value: float) -> bool:
    if target == "wright":
        return value >= WRIGHT_QUANTUM_MAX - WRIGHT_TOLERANCE
    return value <= KCBS_QUANTUM_MIN + KCBS_TOLERANCE


def _warm_start(dim: int) -> np.ndarray:
    pent = make_pentagram()
    vecs = np.zeros((5, dim), dtype=complex)
    vecs[:, :3] = pent.vectors()
    psi = np.zeros(dim, dtype=complex)
    psi[:3] = pent.test_state.amplitudes
    return encode(psi, vecs)


def maximize_violation(target: str = "wright", dimension: int = 3, seed: int = 0,
                       budget: int = DEFAULT_RESTARTS, max_evals: int = DEFAULT_EVALS,
                       warm_start: bool = False, workers: int = 1) -> OptimizationResult:
    """Search for the configuration maximizing W (``"wright"``) or minimizing kappa (``"kcbs"``).

    ``budget`` is the number of restarts. Restart ``k`` uses the ``k``-th
    child of ``SeedSequence(seed)`` and penalty weight ``10 * 2**min(k, 10)``,
    so the outcome does not depend on ``workers``. With ``warm_start`` the
    first restart begins at the optimal pentagram. Failing to reach the
    known optimum sets ``converged=False``; it is not an error.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {sorted(TARGETS)}")
    if budget < 1:
        raise ValueError("budget must allow at least one restart")
    if dimension < 3:
        raise ValueError("no violation exists below dimension 3")
    code = TARGETS[target]
    n = kernels.n_params(dimension)
    backend = kernels.for_dimension(dimension)
    children = np.random.SeedSequence(seed).spawn(budget)

    def one(k):
        if k == 0 and warm_start:
            x0 = _warm_start(dimension)
        else:
            x0 = np.random.default_rng(children[k]).uniform(0, 2 * np.pi, n)
        penalty = BASE_PENALTY * 2.0 ** min(k, 10)
        return backend.minimize_pentagon(x0, dimension, code, penalty, INITIAL_STEP, max_evals)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, range(budget)))
    else:
        runs = [one(k) for k in range(budget)]

    best_k = min(range(budget), key=lambda k: (runs[k][1], k))
    psi, vecs = configuration(runs[best_k][0], dimension)
    value = evaluate(target, psi, vecs)
    residual = max(abs(np.vdot(vecs[i], vecs[(i + 1) % 5])) for i in range(5))
    return OptimizationResult(
        target=target,
        dimension=dimension,
        best_value=float(value),
        vectors=vecs,
        state=psi,
        iterations=int(sum(r[2] for r in runs)),
        residual=float(residual),
        converged=_threshold_met(target, value),
        seed=seed,
        restarts=budget,
        restart_values=[r[1] for r in runs],
    )


def as_state(result: OptimizationResult) -> StateVector:
    return StateVector.normalized(result.state)
