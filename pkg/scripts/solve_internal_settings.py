"""Solve for the shared internal plate angles and compare with the frozen values.

Usage: python scripts/solve_internal_settings.py
"""
import math

from qutritlab.core import pentagram_constants
from qutritlab.photonic import (
    INTERNAL_HWP_DEG,
    INTERNAL_QWP_DEG,
    fidelity_table,
    solve_internal_settings,
)


def main():
    solved = solve_internal_settings()
    q, h = solved.angles_deg
    r = pentagram_constants()["r"]
    print(f"solved   QWP {q!r} deg  HWP {h!r} deg")
    print(f"frozen   QWP {INTERNAL_QWP_DEG!r} deg  HWP {INTERNAL_HWP_DEG!r} deg")
    print(f"atan(r)  {math.degrees(math.atan(r))!r} deg, half {math.degrees(math.atan(r)) / 2!r} deg")
    print(f"worst fidelity {solved.worst_fidelity!r}")
    for i, theta, fid in fidelity_table():
        print(f"  Q{i} theta={theta:6.1f}  F={fid:.16f}")


if __name__ == "__main__":
    main()
