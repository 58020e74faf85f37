"""Simulation toolkit for state-independent contextuality tests on a qutrit."""

__version__ = "0.1.0"

from .core import (
    DensityMatrix,
    Pentagram,
    Question,
    StateVector,
    born_probability,
    luders_update,
    make_pentagram,
)
from .inequalities import (
    ClassicalStrategy,
    classical_kcbs_bound,
    classical_wright_bound,
    kcbs_value,
    wright_value,
)
from .lab import NoiseModel, ShotPlan, fit_leakage, run_experiment
from .optimize import maximize_violation
from .sequential import JointDistribution, joint_distribution, kcbs_run

__all__ = [
    "ClassicalStrategy",
    "DensityMatrix",
    "JointDistribution",
    "NoiseModel",
    "Pentagram",
    "Question",
    "ShotPlan",
    "StateVector",
    "born_probability",
    "classical_kcbs_bound",
    "classical_wright_bound",
    "fit_leakage",
    "joint_distribution",
    "kcbs_run",
    "kcbs_value",
    "luders_update",
    "make_pentagram",
    "maximize_violation",
    "run_experiment",
    "wright_value",
]
