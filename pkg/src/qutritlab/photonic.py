"""Jones-calculus model of the photonic qutrit and its measurement devices.

A photon lives in four modes ordered ``(H,b), (V,b), (H,a), (V,a)``; the
qutrit uses the first three and ``(V,a)`` is the loss sink. Delay lines
are tracked as time bins: a :class:`ModeState` keeps one four-mode
amplitude vector per accumulated delay.

A measurement device rotates the polarization in mode ``b`` with a half
wave plate at ``theta``, moves mode ``a`` into mode ``b`` (flipping its
polarization), turns the question's eigenstate into ``(H,b)`` with two
internal plates, delays ``(H,b)`` and then undoes every step except the
delay. Devices for different questions differ only in ``theta``.
"""
from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .core import TOL_CONSTRUCT, Pentagram, Question, StateVector, make_pentagram
from .sequential import SLOT_SPACING_NS

MODES = ("Hb", "Vb", "Ha", "Va")
HB, VB, HA, VA = range(4)
LOSS_MODE = VA

# Half-wave-plate angles (degrees) that select questions 0..4.
QUESTION_ANGLES_DEG = (45.0, 117.0, 9.0, 81.0, 153.0)

# Internal plate angles shared by all devices; produced by
# solve_internal_settings() (see scripts/solve_internal_settings.py).
INTERNAL_QWP_DEG = 41.96991523437545
INTERNAL_HWP_DEG = 20.984957617187725

FIDELITY_TOLERANCE = 1e-6


class DeviceConfigurationError(RuntimeError):
    """The internal plates could not be tuned to realise the target questions."""

    def __init__(self, message, fidelity):
        super().__init__(f"{message} (best fidelity {fidelity:.9f})")
        self.fidelity = fidelity


def rotation(theta_rad):
    c, s = math.cos(theta_rad), math.sin(theta_rad)
    return np.array([[c, -s], [s, c]])


def hwp_transfer(theta_deg):
    """Half wave plate with fast axis at ``theta_deg`` from horizontal."""
    t = math.radians(2 * theta_deg)
    return np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]], dtype=complex)


def qwp_transfer(theta_deg):
    """Quarter wave plate with fast axis at ``theta_deg`` from horizontal."""
    r = rotation(math.radians(theta_deg))
    return r @ np.diag([1.0, 1j]) @ r.T


def _on_mode(jones, mode):
    """Embed a 2x2 polarization operator acting on path ``mode`` ('a' or 'b')."""
    op = np.eye(4, dtype=complex)
    k = 0 if mode == "b" else 2
    op[k:k + 2, k:k + 2] = jones
    return op


def pbs_transfer():
    """Polarizing beam splitter: H passes, V changes path."""
    op = np.zeros((4, 4), dtype=complex)
    op[HB, HB] = op[HA, HA] = 1
    op[VA, VB] = op[VB, VA] = 1
    return op


def mode_transfer():
    """Move mode ``a`` into mode ``b`` with a polarization flip.

    Built from wave plates at 45 degrees around a PBS; the net effect is the
    permutation ``(H,a)->(V,b)``, ``(V,b)->(H,b)``, ``(H,b)->(H,a)`` with
    the loss mode ``(V,a)`` untouched.
    """
    flip = hwp_transfer(45.0)
    return _on_mode(flip, "a") @ pbs_transfer() @ _on_mode(flip, "a") @ _on_mode(flip, "b")


def phase_shift(phi_rad, mode):
    op = np.eye(4, dtype=complex)
    k = 0 if mode == "b" else 2
    op[k, k] = op[k + 1, k + 1] = np.exp(1j * phi_rad)
    return op


@dataclass(frozen=True)
class OpticalElement:
    """One element of a device pipeline.

    ``kind`` is one of ``hwp``, ``qwp``, ``pbs``, ``mirror``, ``phase``,
    ``transfer`` or ``delay``. Angles are in degrees (``phase`` uses
    radians), delays in nanoseconds. ``inverse`` marks the element that
    undoes its forward counterpart.
    """

    kind: str
    mode: str = "b"
    angle: float = 0.0
    delay_ns: float = 0.0
    inverse: bool = False

    def matrix(self) -> np.ndarray:
        if self.kind == "hwp":
            op = _on_mode(hwp_transfer(self.angle), self.mode)
        elif self.kind == "qwp":
            op = _on_mode(qwp_transfer(self.angle), self.mode)
        elif self.kind == "pbs":
            op = pbs_transfer()
        elif self.kind == "mirror":
            op = np.eye(4, dtype=complex)
        elif self.kind == "phase":
            op = phase_shift(self.angle, self.mode)
        elif self.kind == "transfer":
            op = mode_transfer()
        elif self.kind == "delay":
            op = np.eye(4, dtype=complex)
        else:
            raise ValueError(f"unknown optical element {self.kind!r}")
        return op.conj().T if self.inverse else op

    def inverted(self) -> "OpticalElement":
        return OpticalElement(self.kind, self.mode, self.angle, self.delay_ns, not self.inverse)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("hwp", "qwp", "phase", "delay"):
            out["mode"] = self.mode
        if self.kind in ("hwp", "qwp", "phase"):
            out["angle"] = self.angle
        if self.kind == "delay":
            out["delay_ns"] = self.delay_ns
        if self.inverse:
            out["inverse"] = True
        return out


@dataclass(frozen=True, eq=False)
class ModeState:
    """Photon amplitudes per time bin; row ``k`` has accumulated delay ``delays[k]``."""

    delays: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        if amps.shape != (len(self.delays), 4):
            raise ValueError("need one four-mode amplitude row per time bin")
        if self.norm() > 1 + TOL_CONSTRUCT:
            raise ValueError("mode state norm exceeds 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))

    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self.amplitudes)))

    def loss(self) -> float:
        """Probability that is gone or sits in the loss mode."""
        amps = np.asarray(self.amplitudes)
        return 1.0 - self.norm() ** 2 + float(np.sum(np.abs(amps[:, LOSS_MODE]) ** 2))

    def bin(self, delay_ns) -> np.ndarray:
        for d, row in zip(self.delays, self.amplitudes):
            if abs(d - delay_ns) < 1e-9:
                return row
        return np.zeros(4, dtype=complex)

    def bin_probabilities(self) -> dict:
        return {d: float(np.sum(np.abs(row) ** 2)) for d, row in zip(self.delays, self.amplitudes)}

    @classmethod
    def vacuum(cls) -> "ModeState":
        return cls((0.0,), np.zeros((1, 4)))


def encode(state) -> ModeState:
    """Qutrit amplitudes onto ``|0>=(H,b)``, ``|1>=(V,b)``, ``|2>=(H,a)``."""
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    if amps.size != 3:
        raise ValueError("only qutrit states can be encoded")
    row = np.zeros(4, dtype=complex)
    row[:3] = amps
    return ModeState((0.0,), row[None, :])


def decode_bin(row) -> np.ndarray:
    """Qutrit amplitudes carried by a four-mode row (loss mode dropped)."""
    return np.asarray(row)[:3].copy()


def propagate(elements, state: ModeState) -> ModeState:
    bins = dict(zip(state.delays, np.asarray(state.amplitudes)))
    for el in elements:
        if el.kind == "delay":
            k = HB if el.mode == "b" else HA
            shifted = {}
            for d, row in bins.items():
                moved = np.zeros(4, dtype=complex)
                moved[k] = row[k]
                kept = row.copy()
                kept[k] = 0
                shifted[d] = shifted.get(d, 0) + kept
                shifted[d + el.delay_ns] = shifted.get(d + el.delay_ns, 0) + moved
            bins = shifted
        else:
            op = el.matrix()
            bins = {d: op @ row for d, row in bins.items()}
    delays = tuple(sorted(bins))
    return ModeState(delays, np.array([bins[d] for d in delays]))


@dataclass(frozen=True)
class MeasurementDevice:
    elements: tuple
    theta_deg: float = float("nan")
    delay_ns: float = SLOT_SPACING_NS
    internal_deg: tuple = field(default=(INTERNAL_QWP_DEG, INTERNAL_HWP_DEG))

    def apply(self, state: ModeState) -> ModeState:
        return propagate(self.elements, state)

    def without_delay(self) -> tuple:
        return tuple(el for el in self.elements if el.kind != "delay")

    def inverse(self) -> "MeasurementDevice":
        """Formal inverse with delays dropped."""
        els = tuple(el.inverted() for el in reversed(self.without_delay()))
        return MeasurementDevice(els, self.theta_deg, self.delay_ns, self.internal_deg)

    def branch_maps(self):
        """Maps from qutrit input to the undelayed and delayed output rows (each 4x3)."""
        prompt = np.zeros((4, 3), dtype=complex)
        late = np.zeros((4, 3), dtype=complex)
        for k in range(3):
            basis = np.zeros(3)
            basis[k] = 1
            out = self.apply(encode(basis))
            prompt[:, k] = out.bin(0.0)
            late[:, k] = out.bin(self.delay_ns)
        return prompt, late

    def isometry_defect(self) -> float:
        """``max |M^dag M - 1|`` for the qutrit -> (modes x bins) map."""
        prompt, late = self.branch_maps()
        m = np.vstack([prompt, late])
        return float(np.max(np.abs(m.conj().T @ m - np.eye(3))))

    def to_json(self) -> dict:
        return {
            "theta_deg": self.theta_deg,
            "delay_ns": self.delay_ns,
            "internal_deg": list(self.internal_deg),
            "elements": [el.to_json() for el in self.elements],
        }


def device_pipeline(theta_deg, delay_ns, qwp_deg, hwp_deg):
    forward = (
        OpticalElement("hwp", "b", theta_deg),
        OpticalElement("transfer"),
        OpticalElement("qwp", "b", qwp_deg),
        OpticalElement("hwp", "b", hwp_deg),
    )
    backward = tuple(el.inverted() for el in reversed(forward[1:]))
    # the outer plate is its own inverse, so the last element is a plain HWP at theta
    return forward + (OpticalElement("delay", "b", delay_ns=delay_ns),) + backward + (forward[0],)


_solve_lock = threading.Lock()


def build_device(theta_deg, delay_ns=SLOT_SPACING_NS, internal=None) -> MeasurementDevice:
    """Device asking the question selected by ``theta_deg``.

    ``internal`` overrides the two internal plate angles; the default uses
    the frozen solved values. Pass ``internal="solve"`` to use a fresh
    (memoized) numerical solve instead.
    """
    if delay_ns <= 0:
        raise ValueError("the delay line must be longer than zero")
    if internal is None:
        internal = (INTERNAL_QWP_DEG, INTERNAL_HWP_DEG)
    elif internal == "solve":
        solved = solve_internal_settings()
        if solved.worst_fidelity < 1 - FIDELITY_TOLERANCE:
            raise DeviceConfigurationError("internal-settings solve failed", solved.worst_fidelity)
        internal = solved.angles_deg
    q, h = map(float, internal)
    return MeasurementDevice(device_pipeline(float(theta_deg), float(delay_ns), q, h),
                             float(theta_deg), float(delay_ns), (q, h))


def device_for_question(index: int, delay_ns=SLOT_SPACING_NS, internal=None) -> MeasurementDevice:
    return build_device(QUESTION_ANGLES_DEG[index % 5], delay_ns, internal)


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    effective_vector: np.ndarray
    branch_singular_values: np.ndarray
    passed: bool


def effective_eigenvector(device: MeasurementDevice):
    """Qutrit state that the device sends entirely into its delay line."""
    _, late = device.branch_maps()
    _, sv, vh = np.linalg.svd(late)
    return vh[0].conj(), sv


def verify_device(device: MeasurementDevice, target: Question) -> FidelityReport:
    vec, sv = effective_eigenvector(device)
    fid = float(abs(np.vdot(vec, target.vector)) ** 2)
    return FidelityReport(fid, vec, sv, fid >= 1 - FIDELITY_TOLERANCE)


@dataclass(frozen=True)
class InternalSolve:
    angles_deg: tuple
    fidelities: tuple

    @property
    def worst_fidelity(self) -> float:
        return min(self.fidelities)


def _leakage(angles, pentagram):
    """Parts of each device's effective eigenvector orthogonal to its target.

    The squared norm of the returned vector is the summed infidelity, but
    unlike ``1 - F`` it is linear in the angle error, so least squares can
    drive it down to rounding level.
    """
    out = []
    for theta, q in zip(QUESTION_ANGLES_DEG, pentagram):
        dev = MeasurementDevice(device_pipeline(theta, SLOT_SPACING_NS, *angles))
        _, late = dev.branch_maps()
        # late = |out><v_eff|; its largest row is a smooth-phase copy of <v_eff|
        row = late[np.argmax(np.linalg.norm(late, axis=1))]
        v = row.conj() / np.linalg.norm(row)
        r = v - q.vector * np.vdot(q.vector, v)
        out.extend([r.real, r.imag])
    return np.concatenate(out)


def _fidelities(angles, pentagram):
    return np.array([
        verify_device(
            MeasurementDevice(device_pipeline(theta, SLOT_SPACING_NS, *angles)), q).fidelity
        for theta, q in zip(QUESTION_ANGLES_DEG, pentagram)])


@functools.lru_cache(maxsize=1)
def _solve_cached() -> InternalSolve:
    from scipy.optimize import least_squares

    pent = make_pentagram()
    best = None
    best_cost = math.inf
    # coarse grid of starting points, then least squares
    for q0 in (0.0, 30.0, 60.0):
        for h0 in (0.0, 30.0, 60.0):
            fit = least_squares(_leakage, [q0, h0], args=(pent,),
                                xtol=1e-15, ftol=1e-15, gtol=1e-15)
            angles = tuple(float(a) for a in np.mod(fit.x, 180.0))
            cost = float(np.sum(_leakage(angles, pent) ** 2))
            if cost < best_cost:
                best_cost = cost
                best = InternalSolve(angles, tuple(float(f) for f in _fidelities(angles, pent)))
    return best


def solve_internal_settings() -> InternalSolve:
    """Internal plate angles realising all five questions at once.

    Runs at most once per process; later calls return the cached result.
    """
    with _solve_lock:
        return _solve_cached()


@dataclass(frozen=True)
class CascadeResult:
    slot_probabilities: np.ndarray
    output: ModeState

    @property
    def loss(self) -> float:
        return self.output.loss()


def cascade(first: MeasurementDevice, second: MeasurementDevice, state: ModeState,
            between=()) -> CascadeResult:
    """Send ``state`` through two devices and read the arrival-time slots.

    ``first`` must delay by one slot spacing and ``second`` by two. Extra
    elements in ``between`` are placed after the first device.
    """
    if abs(second.delay_ns - 2 * first.delay_ns) > 1e-9:
        raise ValueError("the second delay line must be twice as long as the first")
    out = second.apply(propagate(between, first.apply(state)))
    probs = np.zeros(4)
    for d, row in zip(out.delays, out.amplitudes):
        k = int(round(d / first.delay_ns))
        probs[k] += float(np.sum(np.abs(row[:3]) ** 2))
    return CascadeResult(probs, out)


def fidelity_table(pentagram: Pentagram | None = None):
    """``(index, theta, fidelity)`` for the five standard devices."""
    pent = pentagram or make_pentagram()
    return [(i, QUESTION_ANGLES_DEG[i], verify_device(device_for_question(i), pent[i]).fidelity)
            for i in range(5)]
