"""Low-energy expansion of <g, R(z) f> on the s-wave sector: the singular
coefficient and the remainder decay with and without the z_nu term.

    python3 scripts/kernel_expansion.py
"""
import numpy as np

from thresholdlab.model_resolvent import AngularSector, ExpansionProbe, log_grid


def main():
    grid = log_grid(1e-6, 40.0, 4001)
    f = np.exp(-grid.r**2)
    g = grid.r * np.exp(-grid.r**2)
    probe = ExpansionProbe(AngularSector(3, 0), f, g, grid, order=1)
    closed = probe.singular_coefficient()
    fitted = probe.fitted_singular_coefficient()
    print(f"singular coefficient: closed {closed:.8f}, fitted {fitted:.8f}, rel err {abs(fitted / closed - 1):.2e}")
    mods = np.logspace(-4, -2, 9)
    zs = mods * np.exp(1.25j * np.pi)
    with_term = [probe.remainder(z, True) for z in zs]
    without = [probe.remainder(z, False) for z in zs]
    print(f"{'|z|':>10} {'remainder':>12} {'without z_nu':>14}")
    for m, a, b in zip(mods, with_term, without):
        print(f"{m:>10.2e} {a:>12.3e} {b:>14.3e}")
    print(f"slopes: {np.polyfit(np.log(mods), np.log(with_term), 1)[0]:.3f} with, "
          f"{np.polyfit(np.log(mods), np.log(without), 1)[0]:.3f} without")


if __name__ == "__main__":
    main()
