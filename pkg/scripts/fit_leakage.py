"""Fit the exclusivity leakage angle to a target Wright sum.

Usage: python scripts/fit_leakage.py [--target 2.292] [--visibilities 0.8 0.85 0.9]
"""
import argparse
import math

from qutritlab.lab import fit_leakage


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--target", type=float, default=2.292)
    p.add_argument("--visibilities", type=float, nargs="+", default=[0.80, 0.85, 0.90])
    args = p.parse_args()
    fit = fit_leakage(args.target, tuple(args.visibilities))
    print(f"leakage {fit.leakage!r} rad ({math.degrees(fit.leakage):.4f} deg)")
    for v, w in zip(fit.visibilities, fit.values):
        print(f"  V={v:.2f}  W={w:.6f}")


if __name__ == "__main__":
    main()
