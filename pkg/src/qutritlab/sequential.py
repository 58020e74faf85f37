"""Exact joint statistics of two questions asked one after the other.

Joint probabilities are built by explicit enumeration of the four outcome
paths with Lüders updates in between, so non-commuting (perturbed)
questions go through the same code as the ideal ones.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    MIN_BRANCH_PROBABILITY,
    TOL_CONSTRUCT,
    Pentagram,
    Question,
    State,
    born_probability,
    luders_update,
    outcome_probability,
)

SLOT_SPACING_NS = 50.0


class Outcome(enum.IntEnum):
    """Answer of a question. Yes lights the blue lamp, no the red one."""

    YES = +1
    NO = -1

    @classmethod
    def coerce(cls, value) -> "Outcome":
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


@dataclass(frozen=True)
class JointDistribution:
    p_yy: float
    p_yn: float
    p_ny: float
    p_nn: float
    first_index: int = 0
    second_index: int = 1

    def __post_init__(self):
        probs = self.as_array()
        if np.any(probs < -TOL_CONSTRUCT) or np.any(probs > 1 + TOL_CONSTRUCT):
            raise ValueError(f"probabilities out of range: {probs}")
        if abs(probs.sum() - 1.0) > TOL_CONSTRUCT:
            raise ValueError(f"joint distribution sums to {probs.sum()!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_yy, self.p_yn, self.p_ny, self.p_nn])

    def prob(self, first: int, second: int) -> float:
        key = ("y" if first == Outcome.YES else "n") + ("y" if second == Outcome.YES else "n")
        return getattr(self, "p_" + key)

    def swapped(self) -> "JointDistribution":
        """Same numbers relabelled as if the second question had been asked first."""
        return JointDistribution(self.p_yy, self.p_ny, self.p_yn, self.p_nn,
                                 self.second_index, self.first_index)

    def first_marginal(self) -> float:
        return self.p_yy + self.p_yn

    def second_marginal(self) -> float:
        return self.p_yy + self.p_ny

    def to_row(self) -> dict:
        return {
            "i": self.first_index,
            "j": self.second_index,
            "p_yy": self.p_yy,
            "p_yn": self.p_yn,
            "p_ny": self.p_ny,
            "p_nn": self.p_nn,
            "correlation": correlation(self),
        }

    @classmethod
    def from_probs(cls, probs, first_index=0, second_index=1) -> "JointDistribution":
        p = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
        p = p / p.sum()
        return cls(*map(float, p), first_index, second_index)


CSV_COLUMNS = ("i", "j", "p_yy", "p_yn", "p_ny", "p_nn", "correlation")


def joint_distribution(state: State, q_first: Question, q_second: Question) -> JointDistribution:
    probs = {}
    for o1 in (Outcome.YES, Outcome.NO):
        p1 = outcome_probability(state, q_first, o1)
        if p1 <= MIN_BRANCH_PROBABILITY:
            probs[o1, Outcome.YES] = probs[o1, Outcome.NO] = 0.0
            continue
        post = luders_update(state, q_first, o1)
        p2 = born_probability(post, q_second)
        probs[o1, Outcome.YES] = p1 * p2
        probs[o1, Outcome.NO] = p1 * (1.0 - p2)
    return JointDistribution.from_probs(
        [probs[Outcome.YES, Outcome.YES], probs[Outcome.YES, Outcome.NO],
         probs[Outcome.NO, Outcome.YES], probs[Outcome.NO, Outcome.NO]],
        q_first.index, q_second.index)


def correlation(jd: JointDistribution) -> float:
    """``<Q Q'> = p_yy + p_nn - p_yn - p_ny``."""
    return jd.p_yy + jd.p_nn - jd.p_yn - jd.p_ny


@dataclass(frozen=True)
class KcbsRun:
    order: str
    distributions: tuple
    correlations: tuple
    kappa: float


def edge_pairs(order: str):
    """Ordered (first, second) question indices for the five edges."""
    if order == "forward":
        return [(i, (i + 1) % 5) for i in range(5)]
    if order == "reverse":
        return [((i + 1) % 5, i) for i in range(5)]
    raise ValueError(f"order must be 'forward' or 'reverse', got {order!r}")


def kcbs_run(state: State, pentagram: Pentagram, order: str = "forward") -> KcbsRun:
    dists = tuple(joint_distribution(state, pentagram[i], pentagram[j])
                  for i, j in edge_pairs(order))
    corr = tuple(correlation(d) for d in dists)
    return KcbsRun(order, dists, corr, float(sum(corr)))


@dataclass(frozen=True)
class TimeSlot:
    slot: str
    delay_ns: float

    @property
    def index(self) -> int:
        return int(self.slot[1])


TIME_SLOTS = tuple(TimeSlot(f"t{k}", k * SLOT_SPACING_NS) for k in range(4))


def outcome_to_timeslot(first, second) -> TimeSlot:
    """Arrival slot of the photon after the two devices.

    The first device delays its yes component by one slot spacing, the
    second by two, so (no, no), (yes, no), (no, yes), (yes, yes) land in
    t0, t1, t2, t3.
    """
    o1, o2 = Outcome.coerce(first), Outcome.coerce(second)
    k = (o1 == Outcome.YES) + 2 * (o2 == Outcome.YES)
    return TIME_SLOTS[k]


def slot_probabilities(jd: JointDistribution) -> np.ndarray:
    """Joint distribution rearranged as probabilities over t0..t3."""
    out = np.zeros(4)
    for o1 in Outcome:
        for o2 in Outcome:
            out[outcome_to_timeslot(o1, o2).index] = jd.prob(o1, o2)
    return out


@dataclass(frozen=True)
class MarginalReport:
    edge: int
    first_alone: float
    first_as_second: float
    second_alone: float
    second_as_second: float
    discrepancy: float


def marginal_consistency(state: State, pentagram: Pentagram, edge_index: int) -> MarginalReport:
    """How much asking one question first disturbs the other's yes rate.

    For edge ``i`` both ``Q_i`` and ``Q_{i+1}`` are asked alone and second;
    the report holds the largest absolute difference.
    """
    qa, qb = pentagram[edge_index], pentagram[edge_index + 1]
    a_alone = born_probability(state, qa)
    b_alone = born_probability(state, qb)
    # Asked first, a marginal equals the lone probability by construction.
    b_second = joint_distribution(state, qa, qb).second_marginal()
    a_second = joint_distribution(state, qb, qa).second_marginal()
    disc = max(abs(a_alone - a_second), abs(b_alone - b_second))
    return MarginalReport(edge_index % 5, a_alone, a_second, b_alone, b_second, disc)
