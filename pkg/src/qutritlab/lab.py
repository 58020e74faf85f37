"""Monte Carlo photon counting with imperfect devices.

Noise enters in two ways:

* **Exclusivity leakage.** Device ``i`` realizes ``v_i`` rotated by an
  angle ``eps_i`` towards ``v_{i+1}``, with ``eps_i = leakage + drift``,
  where drift is drawn per measurement sample with standard deviation
  ``drift_sigma``.
* **Visibility.** At each device's recombination the coherence between
  path modes ``a`` and ``b`` is multiplied by the device visibility ``V``.
  In qutrit terms the coherences between ``{|0>, |1>}`` (mode b) and
  ``|2>`` (mode a) are scaled by ``V`` before the ideal Lüders
  measurement, which is the same as ``V * P_coherent + (1 - V) * P_incoherent``.

Counts are sampled per setting from a multinomial over arrival slots
(``t0, t1`` for single questions, ``t0..t3`` for pairs).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .core import (
    DensityMatrix,
    Pentagram,
    Question,
    StateVector,
    State,
    born_probability,
    luders_update,
    make_pentagram,
    rotate_toward,
    MIN_BRANCH_PROBABILITY,
)
from .inequalities import (
    KCBS_CLASSICAL_BOUND,
    WRIGHT_CLASSICAL_BOUND,
    ClassicalStrategy,
    classical_joint_distribution,
    classical_yes_probabilities,
)
from .sequential import JointDistribution, edge_pairs, slot_probabilities

# Detected photons per setting: about 3e4 per second for 1 s.
DEFAULT_SHOTS = 30_000
DEFAULT_SAMPLES = 10

B_MODE = (0, 1)
A_MODE = (2,)


class UndefinedEstimateError(ValueError):
    """A setting has no recorded counts, so no rate can be estimated."""


@dataclass(frozen=True)
class NoiseModel:
    """Device imperfections.

    ``visibility`` is one number for all devices or five, one per question.
    ``leakage`` and ``drift_sigma`` are in radians.
    """

    visibility: Union[float, tuple] = 1.0
    leakage: float = 0.0
    drift_sigma: float = 0.0

    def __post_init__(self):
        vis = self.visibility
        if isinstance(vis, (list, tuple, np.ndarray)):
            vis = tuple(float(v) for v in vis)
            if len(vis) != 5:
                raise ValueError("give one visibility or one per question")
        else:
            vis = float(vis)
        object.__setattr__(self, "visibility", vis)
        if any(not 0.0 <= v <= 1.0 for v in self.visibilities()):
            raise ValueError("visibility must lie in [0, 1]")
        if self.leakage < 0:
            raise ValueError("leakage must be nonnegative")
        if self.drift_sigma < 0:
            raise ValueError("drift_sigma must be nonnegative")

    def visibilities(self) -> tuple:
        if isinstance(self.visibility, tuple):
            return self.visibility
        return (self.visibility,) * 5

    def device_angles(self, rng=None) -> np.ndarray:
        """Rotation angle of each device's eigenvector for one measurement sample."""
        angles = np.full(5, float(self.leakage))
        if self.drift_sigma > 0 and rng is not None:
            angles = angles + rng.normal(0.0, self.drift_sigma, 5)
        return angles

    def to_json(self) -> dict:
        d = asdict(self)
        if isinstance(self.visibility, tuple):
            d["visibility"] = list(self.visibility)
        return d


IDEAL = NoiseModel()


@dataclass(frozen=True)
class ShotPlan:
    shots_per_setting: int = DEFAULT_SHOTS
    seed: int = 0
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.shots_per_setting < 1:
            raise ValueError("shots_per_setting must be at least 1")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def shots_in_sample(self, s: int) -> int:
        base, extra = divmod(self.shots_per_setting, self.samples)
        return base + (1 if s < extra else 0)


def perturbed_pentagram(pentagram: Pentagram, angles) -> Pentagram:
    """Rotate each ``v_i`` by ``angles[i]`` towards the ideal ``v_{i+1}``."""
    qs = tuple(rotate_toward(pentagram[i], pentagram[i + 1], float(angles[i])) for i in range(5))
    return Pentagram(qs, pentagram.test_state, check=False)


def dephase(state: State, visibility: float) -> DensityMatrix:
    """Scale the coherences between path modes a and b by ``visibility``."""
    if isinstance(state, StateVector):
        rho = np.outer(state.amplitudes, state.amplitudes.conj())
    else:
        rho = np.array(state.entries)
    if state.dim != 3:
        raise ValueError("path dephasing is defined for qutrits")
    mask = np.ones((3, 3))
    for i in B_MODE:
        for j in A_MODE:
            mask[i, j] = mask[j, i] = visibility
    return DensityMatrix(rho * mask)


def _noisy_yes(state: State, q: Question, visibility: float) -> float:
    return born_probability(dephase(state, visibility), q)


def _noisy_joint(state: State, qa: Question, qb: Question, va: float, vb: float) -> JointDistribution:
    rho = dephase(state, va)
    probs = []
    for outcome in (+1, -1):
        p1 = born_probability(rho, qa) if outcome == +1 else 1 - born_probability(rho, qa)
        if p1 <= MIN_BRANCH_PROBABILITY:
            probs.append((0.0, 0.0))
            continue
        post = dephase(luders_update(rho, qa, outcome), vb)
        p2 = born_probability(post, qb)
        probs.append((p1 * p2, p1 * (1 - p2)))
    (yy, yn), (ny, nn) = probs
    return JointDistribution.from_probs([yy, yn, ny, nn], qa.index, qb.index)


def noisy_distribution(state: State, pentagram: Pentagram, setting, noise: NoiseModel = IDEAL,
                       rng=None):
    """Outcome statistics of an imperfect measurement.

    ``setting`` is a question index (returns the yes probability) or an
    ordered pair of indices (returns a :class:`JointDistribution`). ``rng``
    draws the drift part of the leakage; without it only the static
    leakage is applied.
    """
    pent = perturbed_pentagram(pentagram, noise.device_angles(rng))
    vis = noise.visibilities()
    if isinstance(setting, (tuple, list)):
        i, j = (int(k) % 5 for k in setting)
        return _noisy_joint(state, pent[i], pent[j], vis[i], vis[j])
    i = int(setting) % 5
    return _noisy_yes(state, pent[i], vis[i])


@dataclass(frozen=True, eq=False)
class CountTable:
    """Counts indexed ``[sample, setting, outcome]``."""

    counts: np.ndarray
    settings: tuple
    outcomes: tuple
    seed: int
    stream: int = 0

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 3 or c.shape[1:] != (len(self.settings), len(self.outcomes)):
            raise ValueError("counts must be shaped (samples, settings, outcomes)")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def samples(self) -> int:
        return self.counts.shape[0]

    def pooled(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def shots(self) -> np.ndarray:
        return self.pooled().sum(axis=1)

    def rows(self):
        for k, setting in enumerate(self.settings):
            for m, outcome in enumerate(self.outcomes):
                yield setting, outcome, int(self.pooled()[k, m])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", "outcome", "count"])
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "stream": self.stream,
            "settings": list(self.settings),
            "outcomes": list(self.outcomes),
            "counts": self.counts.tolist(),
        }

    def equals(self, other: "CountTable") -> bool:
        return (self.settings == other.settings and self.outcomes == other.outcomes
                and np.array_equal(self.counts, other.counts))


Source = Union[np.ndarray, Callable[[np.random.Generator], np.ndarray]]


def _draw(n, seq, p):
    return np.random.default_rng(seq).multinomial(n, p)


def sample_counts(source: Source, plan: ShotPlan, settings=None, outcomes=None,
                  stream: int = 0, workers: int = 1) -> CountTable:
    """Multinomial photon counts for every setting and measurement sample.

    ``source`` is a ``(settings, outcomes)`` probability array, or a
    callable returning one; the callable is invoked once per sample with
    that sample's drift generator, so drift is redrawn per sample. Random
    streams derive from ``(plan.seed, stream, sample, setting)`` and do
    not depend on evaluation order or on ``workers``.
    """
    root = np.random.SeedSequence(plan.seed, spawn_key=(stream,))
    sample_seqs = root.spawn(plan.samples)
    blocks = []
    shape = None
    for s, seq in enumerate(sample_seqs):
        drift_seq, count_seq = seq.spawn(2)
        probs = source(np.random.default_rng(drift_seq)) if callable(source) else source
        probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        probs = probs / probs.sum(axis=1, keepdims=True)
        shape = probs.shape
        n = plan.shots_in_sample(s)
        jobs = list(zip(count_seq.spawn(shape[0]), probs))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda job: _draw(n, *job), jobs))
        else:
            rows = [_draw(n, *job) for job in jobs]
        blocks.append(rows)
    settings = tuple(settings) if settings is not None else tuple(range(shape[0]))
    outcomes = tuple(outcomes) if outcomes is not None else tuple(f"t{k}" for k in range(shape[1]))
    return CountTable(np.array(blocks), settings, outcomes, plan.seed, stream)


@dataclass(frozen=True)
class Estimate:
    """Value with an error bar.

    ``sigma`` is ``poisson_sigma`` and ``sample_sigma`` combined in
    quadrature; ``method`` names which of them are present.
    """

    value: float
    sigma: float
    method: str
    poisson_sigma: float = 0.0
    sample_sigma: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    def __str__(self):
        return f"{self.value:.4f} ± {self.sigma:.4f}"


def _combine(value, poisson, per_sample):
    per_sample = np.asarray(per_sample, dtype=float)
    per_sample = per_sample[np.isfinite(per_sample)]
    if per_sample.size > 1:
        sample = float(np.std(per_sample, ddof=1) / math.sqrt(per_sample.size))
        return Estimate(float(value), math.hypot(poisson, sample), "combined", float(poisson), sample)
    return Estimate(float(value), float(poisson), "poisson-propagation", float(poisson), 0.0)


def _yes_rate(counts):
    """Yes fraction and its Poisson-propagated sigma from ``[no, yes]`` counts."""
    no, yes = float(counts[0]), float(counts[1])
    n = yes + no
    if n == 0:
        return math.nan, math.nan
    p = yes / n
    return p, math.sqrt(yes * no / n ** 3)


def _correlation_rate(counts):
    """Correlation and its Poisson sigma from slot counts ``[nn, yn, ny, yy]``."""
    nn, yn, ny, yy = (float(c) for c in counts)
    n = nn + yn + ny + yy
    if n == 0:
        return math.nan, math.nan
    same, diff = yy + nn, yn + ny
    return (same - diff) / n, math.sqrt(4 * same * diff / n ** 3)


def _estimate(table: CountTable, rate):
    pooled = table.pooled()
    if np.any(pooled.sum(axis=1) == 0):
        raise UndefinedEstimateError("a setting recorded no counts")
    per_sample = np.array([[rate(table.counts[s, k])[0] for k in range(len(table.settings))]
                           for s in range(table.samples)])
    parts = []
    for k in range(len(table.settings)):
        value, sig = rate(pooled[k])
        parts.append(_combine(value, sig, per_sample[:, k]))
    total_value = sum(e.value for e in parts)
    total_poisson = math.sqrt(sum(e.poisson_sigma ** 2 for e in parts))
    sample_totals = per_sample.sum(axis=1)
    return parts, _combine(total_value, total_poisson, sample_totals)


def estimate_wright(table: CountTable):
    """Per-question yes probabilities and their sum W.

    ``table`` holds slots ``t0`` (no) and ``t1`` (yes) for the five questions.
    """
    if table.counts.shape[1:] != (5, 2):
        raise ValueError("Wright estimation needs 5 settings with 2 outcomes")
    return _estimate(table, _yes_rate)


def estimate_kcbs(table: CountTable):
    """Per-edge correlations and their sum kappa from slot counts ``t0..t3``."""
    if table.counts.shape[1:] != (5, 4):
        raise ValueError("KCBS estimation needs 5 edges with 4 slots")
    return _estimate(table, _correlation_rate)


# --- experiment harness -----------------------------------------------------

@dataclass
class OrderResult:
    order: str
    noise: NoiseModel
    counts: CountTable
    settings: list
    total: Estimate
    expected: float

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "noise": self.noise.to_json(),
            "counts": self.counts.to_json(),
            "settings": [e.to_json() for e in self.settings],
            "total": self.total.to_json(),
            "expected": self.expected,
        }


@dataclass
class ExperimentReport:
    experiment: str
    source: str
    plan: ShotPlan
    results: list
    classical_bound: float
    notes: list = field(default_factory=list)

    def result(self, order: str = "single") -> OrderResult:
        for r in self.results:
            if r.order == order:
                return r
        raise KeyError(order)

    def significance(self, order: str = "single") -> float:
        """Distance past the classical bound in units of sigma (positive = violation)."""
        r = self.result(order)
        if self.experiment == "wright":
            gap = r.total.value - self.classical_bound
        else:
            gap = self.classical_bound - r.total.value
        return gap / r.total.sigma if r.total.sigma > 0 else math.copysign(math.inf, gap)

    def violates(self, order: str = "single", threshold: float = 3.0) -> bool:
        return self.significance(order) > threshold

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "source": self.source,
            "plan": asdict(self.plan),
            "classical_bound": self.classical_bound,
            "results": [
                dict(r.to_json(), significance=self.significance(r.order),
                     violation=self.violates(r.order))
                for r in self.results
            ],
            "notes": list(self.notes),
        }


def _wright_source(state, pentagram, noise, strategy):
    if strategy is not None:
        p = classical_yes_probabilities(strategy)
        return np.column_stack([1 - p, p])

    def draw(rng):
        p = np.array([noisy_distribution(state, pentagram, i, noise, rng) for i in range(5)])
        return np.column_stack([1 - p, p])
    return draw


def _kcbs_source(state, pentagram, noise, order, strategy):
    pairs = edge_pairs(order)
    if strategy is not None:
        return np.array([slot_probabilities(classical_joint_distribution(strategy, i, j))
                         for i, j in pairs])

    def draw(rng):
        return np.array([slot_probabilities(noisy_distribution(state, pentagram, pair, noise, rng))
                         for pair in pairs])
    return draw


def expected_value(experiment: str, state, pentagram, noise: NoiseModel, order="forward",
                   strategy: ClassicalStrategy = None) -> float:
    """Analytic value with static leakage and no drift."""
    if experiment == "wright":
        src = _wright_source(state, pentagram, noise, strategy)
        probs = src(None) if callable(src) else src
        return float(probs[:, 1].sum())
    src = _kcbs_source(state, pentagram, noise, order, strategy)
    probs = src(None) if callable(src) else src
    # slots t0..t3 are nn, yn, ny, yy
    return float(np.sum(probs[:, 0] + probs[:, 3] - probs[:, 1] - probs[:, 2]))


def run_experiment(which: str, state: State = None, pentagram: Pentagram = None,
                   noise: Union[NoiseModel, Mapping[str, NoiseModel]] = IDEAL,
                   plan: ShotPlan = ShotPlan(), orders: Sequence[str] = ("forward",),
                   strategy: ClassicalStrategy = None, workers: int = 1) -> ExperimentReport:
    """Ideal statistics, then noise, sampling and estimation, end to end.

    ``noise`` may map each order to its own model; the orders of a KCBS run
    are independent calibrations sampled from separate random streams.
    Passing ``strategy`` replaces the quantum source by a classical mixture.
    """
    pentagram = pentagram or make_pentagram()
    state = state if state is not None else pentagram.test_state
    source_label = "classical" if strategy is not None else "quantum"
    results = []
    if which == "wright":
        nm = noise if isinstance(noise, NoiseModel) else noise["single"]
        table = sample_counts(_wright_source(state, pentagram, nm, strategy), plan,
                              settings=[f"Q{i}" for i in range(5)], outcomes=("t0", "t1"),
                              workers=workers)
        parts, total = estimate_wright(table)
        results.append(OrderResult("single", nm, table, parts, total,
                                   expected_value("wright", state, pentagram, nm, strategy=strategy)))
        bound = WRIGHT_CLASSICAL_BOUND
    elif which == "kcbs":
        for stream, order in enumerate(orders):
            nm = noise if isinstance(noise, NoiseModel) else noise[order]
            labels = [f"Q{i}Q{j}" for i, j in edge_pairs(order)]
            table = sample_counts(_kcbs_source(state, pentagram, nm, order, strategy), plan,
                                  settings=labels, outcomes=("t0", "t1", "t2", "t3"),
                                  stream=stream, workers=workers)
            parts, total = estimate_kcbs(table)
            results.append(OrderResult(order, nm, table, parts, total,
                                       expected_value("kcbs", state, pentagram, nm, order, strategy)))
        bound = KCBS_CLASSICAL_BOUND
    else:
        raise ValueError(f"unknown experiment {which!r}")
    return ExperimentReport(which, source_label, plan, results, bound)


@dataclass(frozen=True)
class LeakageFit:
    leakage: float
    target: float
    visibilities: tuple
    values: tuple


def fit_leakage(target_w: float = 2.292, visibilities=(0.80, 0.85, 0.90),
                state: State = None, pentagram: Pentagram = None) -> LeakageFit:
    """Leakage angle whose analytic W, averaged over ``visibilities``, equals ``target_w``."""
    from scipy.optimize import brentq

    pentagram = pentagram or make_pentagram()
    state = state if state is not None else pentagram.test_state

    def mean_w(eps):
        return float(np.mean([
            expected_value("wright", state, pentagram, NoiseModel(v, eps)) for v in visibilities]))

    lo, hi = 0.0, 0.3
    if not (mean_w(lo) - target_w) * (mean_w(hi) - target_w) < 0:
        raise ValueError(f"target W={target_w} is not reachable with leakage in [{lo}, {hi}] rad")
    eps = brentq(lambda e: mean_w(e) - target_w, lo, hi, xtol=1e-14)
    values = tuple(expected_value("wright", state, pentagram, NoiseModel(v, eps))
                   for v in visibilities)
    return LeakageFit(float(eps), target_w, tuple(visibilities), values)
