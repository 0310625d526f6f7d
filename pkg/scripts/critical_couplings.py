"""Critical couplings of model wells against their closed forms.

    python3 scripts/critical_couplings.py
"""
import math
import time

from scipy.special import jn_zeros

from thresholdlab.model_resolvent import AngularSector
from thresholdlab.radial_operator import RadialPotential, exponential, square_well
from thresholdlab.resonance_lab import critical_coupling

J01 = float(jn_zeros(0, 1)[0])
CASES = [
    ("unit square well", square_well(-1.0), AngularSector(3, 0), math.pi**2 / 4),
    ("unit square well", square_well(-1.0), AngularSector(3, 1), math.pi**2),
    ("unit square well", square_well(-1.0), AngularSector(4, 0), J01**2),
    ("exponential e^-r", exponential(-1.0), AngularSector(3, 0), (J01 / 2) ** 2),
]


def main():
    print(f"{'profile':<18} {'n':>2} {'l':>2} {'beta0':>18} {'exact':>18} {'error':>9} {'time':>7}")
    for label, prof, sector, exact in CASES:
        t0 = time.perf_counter()
        beta0 = critical_coupling(RadialPotential(prof), sector)
        dt = time.perf_counter() - t0
        print(f"{label:<18} {sector.n:>2} {sector.ell:>2} {beta0:>18.12f} {exact:>18.12f} {abs(beta0 - exact):>9.1e} {dt:>6.2f}s")


if __name__ == "__main__":
    main()
