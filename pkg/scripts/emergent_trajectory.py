"""Track the eigenvalue born from the s-wave threshold resonance as the
absorption strength lambda grows, and compare with the asymptotic prediction.

    python3 scripts/emergent_trajectory.py [--lambdas 0.01 0.02 ...] [--csv out.csv]
"""
import argparse
import csv

import numpy as np

from thresholdlab.model_resolvent import AngularSector
from thresholdlab.radial_operator import RadialPotential, square_well
from thresholdlab.resonance_lab import critical_coupling, resonance_profile, track_trajectory

S_WAVE = AngularSector(3, 0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.01, 0.02, 0.05, 0.1, 0.2])
    ap.add_argument("--csv", help="write the table here")
    args = ap.parse_args()

    beta0 = critical_coupling(RadialPotential(square_well(-1.0)), S_WAVE)
    pot = RadialPotential(square_well(-1.0), square_well(beta0), beta=beta0)
    prof = resonance_profile(pot, S_WAVE, beta0=beta0)
    pts = track_trajectory(pot, S_WAVE, args.lambdas, prof)

    header = ["lambda", "re_z_num", "im_z_num", "re_z_pred", "im_z_pred", "rel_err", "residual_p"]
    print(f"beta0 = {beta0:.12f}, c1 = {prof.c1:.6f}, c1' = {prof.c1p:.6f}, v11 = {prof.v11:.6f}")
    print("".join(f"{h:>14}" for h in header))
    for p in pts:
        print("".join(f"{v:>14.6g}" for v in p.row()))
    lams = np.array(args.lambdas)
    slope = np.polyfit(np.log(lams), np.log([abs(p.z_num) for p in pts]), 1)[0]
    print(f"fitted |z| ~ lambda^{slope:.3f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(p.row() for p in pts)


if __name__ == "__main__":
    main()
