"""Birman-Schwinger norm lambda * || |V2|^1/2 R1(z) |V2|^1/2 || over the
exclusion disks, as a function of lambda, for the subcritical scenario.

    python3 scripts/bs_norm_scan.py [--n-grid 20]
"""
import argparse

import numpy as np

from thresholdlab.radial_operator import HalfDisk
from thresholdlab.spectral_census import birman_schwinger_guard, builtin_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-grid", type=int, default=20)
    args = ap.parse_args()

    sc = next(s for s in builtin_scenarios() if s.name == "subcritical")
    disks = [HalfDisk(-0.5, 0.3), HalfDisk(1.0, 0.2)]
    print(f"{'lambda':>8} {'max norm':>10}")
    for lam in np.linspace(0.25, 3.0, 12):
        val = birman_schwinger_guard(sc.pot, lam, disks, n_grid=args.n_grid)
        flag = "" if val < 1 else "  (bound no longer excludes eigenvalues)"
        print(f"{lam:>8.3f} {val:>10.4f}{flag}")


if __name__ == "__main__":
    main()
