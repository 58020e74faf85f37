"""Qutrit states, yes/no questions and the Lüders measurement update.

States are plain immutable values wrapping small complex numpy arrays.
Listed components are ket amplitudes in the computational basis
``|0>, |1>, |2>``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# Construction tolerance, physics assertions, aggregate identities.
TOL_CONSTRUCT = 1e-12
TOL_PHYSICS = 1e-10
TOL_AGGREGATE = 1e-9
# Outcome probabilities at or below this are treated as impossible.
MIN_BRANCH_PROBABILITY = 1e-15

YES = +1
NO = -1


class InvalidStateError(ValueError):
    """Raised for vectors or matrices that are not valid quantum states."""


class ConditioningError(ValueError):
    """Raised when conditioning a state on an outcome of zero probability."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size < 2:
            raise InvalidStateError("a state needs at least two amplitudes")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL_CONSTRUCT:
            raise InvalidStateError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidStateError("cannot normalize the zero vector")
        return cls(amps / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "StateVector") -> float:
        """Phase-insensitive overlap ``|<self|other>|``."""
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)))

    def same_ray(self, other: "StateVector", tol: float = TOL_PHYSICS) -> bool:
        return abs(self.overlap(other) - 1.0) <= tol

    def to_json(self) -> list:
        return [[z.real, z.imag] for z in self.amplitudes]

    @classmethod
    def from_json(cls, data) -> "StateVector":
        return cls([complex(re, im) for re, im in data])

    def __repr__(self):
        return f"StateVector({np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state; Hermitian, unit trace, positive semidefinite."""

    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidStateError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > TOL_CONSTRUCT:
            raise InvalidStateError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TOL_CONSTRUCT:
            raise InvalidStateError(f"density matrix trace {tr!r} differs from 1")
        if np.min(np.linalg.eigvalsh(rho)) < -TOL_PHYSICS:
            raise InvalidStateError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", _freeze(rho))

    @classmethod
    def mixture(cls, states, weights) -> "DensityMatrix":
        rho = sum(w * np.outer(s.amplitudes, s.amplitudes.conj())
                  for s, w in zip(states, weights))
        return cls(rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True, eq=False)
class Question:
    """Yes/no question ``Q = 2|v><v| - 1``; yes (+1) means projection onto ``v``."""

    eigenvector: StateVector
    index: int = 0

    @property
    def vector(self) -> np.ndarray:
        return self.eigenvector.amplitudes

    @property
    def dim(self) -> int:
        return self.eigenvector.dim

    @property
    def projector(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    @property
    def observable(self) -> np.ndarray:
        return 2 * self.projector - np.eye(self.dim)


@dataclass(frozen=True, eq=False)
class Pentagram:
    """Five cyclically exclusive questions together with the test state."""

    questions: tuple
    test_state: StateVector
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        qs = tuple(self.questions)
        if len(qs) != 5:
            raise ValueError("a pentagram has exactly five questions")
        object.__setattr__(self, "questions", qs)
        if self.check:
            for i in range(5):
                ok, ov = check_exclusive(qs[i], qs[(i + 1) % 5])
                if not ok:
                    raise ValueError(
                        f"questions {i} and {(i + 1) % 5} are not exclusive "
                        f"(overlap {ov:.3e})")

    def __getitem__(self, i: int) -> Question:
        return self.questions[i % 5]

    def __iter__(self):
        return iter(self.questions)

    def vectors(self) -> np.ndarray:
        return np.array([q.vector for q in self.questions])

    def max_adjacent_overlap(self) -> float:
        return max(self[i].eigenvector.overlap(self[i + 1].eigenvector)
                   for i in range(5))

    def to_json(self) -> dict:
        return {
            "vectors": [q.eigenvector.to_json() for q in self.questions],
            "state": self.test_state.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: dict, check: bool = True) -> "Pentagram":
        qs = tuple(Question(StateVector.from_json(v), i)
                   for i, v in enumerate(data["vectors"]))
        return cls(qs, StateVector.from_json(data["state"]), check=check)

    @classmethod
    def from_vectors(cls, vectors, state, check: bool = True) -> "Pentagram":
        qs = tuple(Question(StateVector.normalized(v), i)
                   for i, v in enumerate(vectors))
        return cls(qs, StateVector.normalized(state), check=check)


def pentagram_constants() -> dict:
    r = math.sqrt(math.cos(math.pi / 5))
    return {
        "r": r,
        "c": math.cos(4 * math.pi / 5),
        "s": math.sin(4 * math.pi / 5),
        "C": math.cos(2 * math.pi / 5),
        "S": math.sin(2 * math.pi / 5),
        "N": 1 / math.sqrt(1 + r * r),
    }


def make_pentagram() -> Pentagram:
    """The optimal pentagram for the state ``(0, 0, 1)``.

    ``v0 = N(1, 0, r)``, ``v1,4 = N(c, ±s, r)``, ``v2,3 = N(C, ∓S, r)``.
    """
    k = pentagram_constants()
    r, c, s, C, S, N = k["r"], k["c"], k["s"], k["C"], k["S"], k["N"]
    rows = [
        (1.0, 0.0, r),
        (c, s, r),
        (C, -S, r),
        (C, S, r),
        (c, -s, r),
    ]
    qs = tuple(Question(StateVector(N * np.array(v)), i) for i, v in enumerate(rows))
    return Pentagram(qs, StateVector([0.0, 0.0, 1.0]))


def _validated(state: State) -> State:
    if not isinstance(state, (StateVector, DensityMatrix)):
        raise InvalidStateError(f"expected a state, got {type(state).__name__}")
    return state


def born_probability(state: State, q: Question) -> float:
    """Probability of the yes answer, ``|<v|psi>|^2`` or ``<v|rho|v>``."""
    _validated(state)
    v = q.vector
    if isinstance(state, StateVector):
        p = abs(np.vdot(v, state.amplitudes)) ** 2
    else:
        p = np.vdot(v, state.entries @ v).real
    return float(min(max(p, 0.0), 1.0))


def outcome_probability(state: State, q: Question, outcome: int) -> float:
    p = born_probability(state, q)
    if outcome == YES:
        return p
    if outcome == NO:
        return 1.0 - p
    raise ValueError(f"outcome must be +1 or -1, got {outcome!r}")


def luders_update(state: State, q: Question, outcome: int) -> State:
    """Post-measurement state after observing ``outcome`` on ``q``."""
    p = outcome_probability(state, q, outcome)
    if p <= MIN_BRANCH_PROBABILITY:
        raise ConditioningError(
            f"outcome {outcome:+d} of question {q.index} has probability {p:.3e}")
    proj = q.projector if outcome == YES else np.eye(q.dim) - q.projector
    if isinstance(state, StateVector):
        return StateVector.normalized(proj @ state.amplitudes)
    rho = proj @ state.entries @ proj
    rho = rho / np.trace(rho).real
    return DensityMatrix((rho + rho.conj().T) / 2)


def expectation(state: State, q: Question) -> float:
    return 2.0 * born_probability(state, q) - 1.0


def check_exclusive(qi: Question, qj: Question, tol: float = TOL_PHYSICS):
    """Return ``(exclusive, overlap)`` with ``overlap = |<vi|vj>|``."""
    ov = qi.eigenvector.overlap(qj.eigenvector)
    return ov <= tol, ov


def rotate_toward(q: Question, toward: Question, angle: float) -> Question:
    """Rotate ``q``'s eigenvector by ``angle`` radians in the plane it spans with ``toward``.

    The part of ``toward`` orthogonal to ``q`` fixes the direction, so the
    result is exact even when the two are not orthogonal.
    """
    v = q.vector
    w = toward.vector - v * np.vdot(v, toward.vector)
    nw = np.linalg.norm(w)
    if nw < TOL_PHYSICS:
        return q
    rotated = math.cos(angle) * v + math.sin(angle) * (w / nw)
    return Question(StateVector.normalized(rotated), q.index)
