"""Finite-difference radial operators for H(lambda) = -Delta + V1 - i lambda V2.

Each angular sector reduces, after u = r^{(n-1)/2} psi, to

    -u'' + [(nu^2 - 1/4)/r^2 + V1(r) - i lambda V2(r)] u = z u

on a uniform grid r_i = i h.  Two outer closures are offered:

* ``dirichlet``: u(r_max) = 0.  The matrix is z-independent and its dense
  spectrum supplies eigenvalue candidates; genuine eigenvalues are separated
  from box modes by the refinement/localization protocol in
  :func:`confirm_point_spectrum`.
* ``transparent``: a ghost node u_{N+1} = mu(z) u_N carrying the decaying
  exterior solution.  For nu = 1/2 the ratio is the exact decaying root of
  the free lattice recurrence, so the truncation introduces no error at all;
  otherwise the continuum ratio of sqrt(r) K_nu(kappa r) is used.  Eigenvalues
  are then zeros of the lattice Jost function :func:`jost`, which resolves
  eigenvalues whose decay length is far larger than any feasible box.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import scipy.special as sps

from .model_resolvent import AngularSector, decay_constant

__all__ = [
    "GridError",
    "NearSingularError",
    "ConfirmationWarning",
    "Profile",
    "square_well",
    "exponential",
    "tabulated",
    "zero_profile",
    "RadialPotential",
    "DiscreteOperator",
    "discretize",
    "exterior_ratio",
    "jost",
    "newton_root",
    "newton_roots",
    "HalfDisk",
    "Disk",
    "count_zeros",
    "locate_roots",
    "complex_spectrum",
    "transparent_spectrum",
    "cluster",
    "Eigenvalue",
    "SpectrumReport",
    "inverse_iteration",
    "confirm_point_spectrum",
    "birman_schwinger_norm",
]


class GridError(ValueError):
    """Grid parameters cannot resolve the potential."""


class NearSingularError(ArithmeticError):
    """A resolvent was requested too close to an eigenvalue."""


class ConfirmationWarning(UserWarning):
    """Stability and localization tests disagree on a candidate."""


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Profile:
    """Radial profile from a named family.

    ``square_well``: amplitude on r < radius, 0 beyond.
    ``exponential``: amplitude * exp(-rate r).
    ``tabulated``: linear interpolation of (grid, values), 0 beyond the last node.
    """

    kind: str
    amplitude: float = 0.0
    radius: float = 1.0
    rate: float = 1.0
    grid: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("square_well", "exponential", "tabulated", "zero"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "square_well" and not self.radius > 0:
            raise ValueError("square_well radius must be positive")
        if self.kind == "exponential" and not self.rate > 0:
            raise ValueError("exponential rate must be positive")
        if self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            if g.size < 2 or g.size != len(self.values) or np.any(np.diff(g) <= 0):
                raise ValueError("tabulated profile needs matching, strictly increasing grid and values")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "square_well":
            return np.where(r < self.radius, self.amplitude, 0.0)
        if self.kind == "exponential":
            return self.amplitude * np.exp(-self.rate * r)
        if self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            return np.interp(r, g, np.asarray(self.values, dtype=float), right=0.0)
        return np.zeros_like(r)

    @property
    def breakpoints(self) -> tuple:
        return (self.radius,) if self.kind == "square_well" else ()

    @property
    def support(self) -> float:
        """Radius beyond which the profile is negligible (< 1e-16 relative)."""
        if self.kind == "square_well":
            return self.radius
        if self.kind == "exponential":
            return 37.0 / self.rate
        if self.kind == "tabulated":
            return float(self.grid[-1])
        return 0.0

    def scaled(self, c: float) -> "Profile":
        if self.kind == "tabulated":
            return Profile("tabulated", grid=self.grid, values=tuple(c * v for v in self.values))
        return Profile(self.kind, c * self.amplitude, self.radius, self.rate)

    def sample(self, r):
        """Values on grid nodes; a node sitting on a jump gets the mean of both sides."""
        r = np.asarray(r, dtype=float)
        v = np.asarray(self(r), dtype=float)
        for b in self.breakpoints:
            hit = np.isclose(r, b, rtol=1e-12, atol=0.0)
            if np.any(hit):
                v = v.copy()
                v[hit] = 0.5 * (self(b * (1 - 1e-12)) + self(b * (1 + 1e-12)))
        return v

    def to_dict(self) -> dict:
        if self.kind == "square_well":
            return {"kind": self.kind, "amplitude": self.amplitude, "radius": self.radius}
        if self.kind == "exponential":
            return {"kind": self.kind, "amplitude": self.amplitude, "rate": self.rate}
        if self.kind == "tabulated":
            return {"kind": self.kind, "grid": list(self.grid), "values": list(self.values)}
        return {"kind": "zero"}


def square_well(amplitude: float, radius: float = 1.0) -> Profile:
    return Profile("square_well", amplitude=amplitude, radius=radius)


def exponential(amplitude: float, rate: float = 1.0) -> Profile:
    return Profile("exponential", amplitude=amplitude, rate=rate)


def tabulated(grid, values) -> Profile:
    return Profile("tabulated", grid=tuple(map(float, grid)), values=tuple(map(float, values)))


def zero_profile() -> Profile:
    return Profile("zero")


@dataclass(frozen=True)
class RadialPotential:
    """V1 = beta * v1 and the absorptive part V2 = v2.

    rho1, rho2, rho1p are the declared decay exponents (|V_j| <= C r^{-rho_j});
    compactly supported and exponential profiles satisfy any finite value.
    """

    v1: Profile
    v2: Profile = field(default_factory=zero_profile)
    beta: float = 1.0
    rho1: float = 4.0
    rho2: float = 4.0
    rho1p: float = 4.0

    def V1(self, r):
        return self.beta * self.v1.sample(r)

    def V2(self, r):
        return self.v2.sample(r)

    def with_beta(self, beta: float) -> "RadialPotential":
        return RadialPotential(self.v1, self.v2, beta, self.rho1, self.rho2, self.rho1p)

    @property
    def support(self) -> float:
        return max(self.v1.support, self.v2.support)

    @property
    def breakpoints(self) -> tuple:
        return tuple(sorted(set(self.v1.breakpoints + self.v2.breakpoints)))

    def is_dissipative(self, r_max: float = 50.0, n: int = 20001) -> bool:
        """V2 >= 0 everywhere and not identically zero (checked on a fine grid)."""
        r = np.linspace(r_max / n, r_max, n)
        v = self.V2(r)
        return bool(np.all(v >= 0.0) and np.any(v > 0.0))

    def decay_ok(self, r_max: float = 50.0, n: int = 4000) -> bool:
        """|V_j| r^{rho_j} on the outer quarter stays below its maximum over [1, 3 r_max / 4]."""
        r = np.linspace(1.0, r_max, n)
        split = int(0.75 * n)
        for prof, rho in ((self.V1, self.rho1), (self.V2, self.rho2)):
            w = np.abs(prof(r)) * r**rho
            if w[split:].max(initial=0.0) > w[:split].max(initial=0.0) * (1 + 1e-12):
                return False
        return True

    def counting_exponents_ok(self) -> bool:
        return self.rho1p > 3.0 and self.rho2 > 3.0

    def to_dict(self) -> dict:
        return {
            "v1": self.v1.to_dict(),
            "v2": self.v2.to_dict(),
            "beta": self.beta,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "rho1p": self.rho1p,
        }


# ---------------------------------------------------------------------------
# discrete operator


@dataclass(frozen=True)
class DiscreteOperator:
    """Tridiagonal discretization of one sector of H(lambda).

    ``diag`` holds 2/h^2 + the potential terms; the off-diagonal is -1/h^2.
    With the transparent closure the last diagonal entry additionally
    receives -mu(z)/h^2, see :meth:`matrix`.
    """

    sector: AngularSector
    r: np.ndarray = field(repr=False)
    h: float
    diag: np.ndarray = field(repr=False)
    lam: float
    closure: str = "dirichlet"

    @property
    def size(self) -> int:
        return self.r.size

    @property
    def r_max(self) -> float:
        return (self.size + 1) * self.h

    @property
    def off(self) -> float:
        return -1.0 / (self.h * self.h)

    def boundary_term(self, z) -> complex:
        if self.closure == "dirichlet":
            return 0j
        return -complex(exterior_ratio(self.sector, z, self.h, self.r_max - self.h)) / self.h**2

    def matrix(self, z=None, shift: complex = 0.0) -> sp.csc_matrix:
        """Sparse matrix of the operator (closure evaluated at z) minus ``shift``."""
        d = self.diag.astype(complex) - shift
        if self.closure == "transparent":
            if z is None:
                raise ValueError("the transparent closure needs the spectral parameter z")
            d[-1] += self.boundary_term(z)
        o = np.full(self.size - 1, self.off)
        return sp.diags([o, d, o], [-1, 0, 1], format="csc")

    def dense(self, z=None) -> np.ndarray:
        return self.matrix(z).toarray()

    def banded(self, z=None, shift: complex = 0.0) -> np.ndarray:
        """(3, N) storage for scipy.linalg.solve_banded."""
        ab = np.empty((3, self.size), dtype=complex)
        ab[0, :] = self.off
        ab[2, :] = self.off
        ab[1, :] = self.diag - shift
        if self.closure == "transparent":
            ab[1, -1] += self.boundary_term(z)
        return ab

    def with_closure(self, closure: str) -> "DiscreteOperator":
        return DiscreteOperator(self.sector, self.r, self.h, self.diag, self.lam, closure)


def discretize(
    pot: RadialPotential,
    sector: AngularSector,
    lam: float,
    r_max: float = 40.0,
    n_points: int = 799,
    closure: str = "dirichlet",
    min_points: int = 200,
) -> DiscreteOperator:
    """Second-order central differences on r_i = i h, i = 1..N, h = r_max/(N+1)."""
    if closure not in ("dirichlet", "transparent"):
        raise ValueError(f"unknown closure {closure!r}")
    if n_points < min_points:
        raise GridError(f"n_points={n_points} below the minimum {min_points}")
    if not r_max > pot.support * (1.0 if closure == "transparent" else 1.5):
        raise GridError(f"r_max={r_max} does not clear the potential support {pot.support}")
    h = r_max / (n_points + 1)
    r = h * np.arange(1, n_points + 1)
    v1 = pot.V1(r)
    v2 = pot.V2(r)
    scale = float(np.max(np.abs(v1) + abs(lam) * np.abs(v2)))
    if h * math.sqrt(scale) > 0.5:
        raise GridError(
            f"h={h:.3g} too coarse for potential scale {scale:.3g} "
            f"(h*sqrt|V| = {h * math.sqrt(scale):.2f} > 0.5)"
        )
    diag = 2.0 / h**2 + sector.centrifugal / r**2 + v1 - 1j * lam * v2
    return DiscreteOperator(sector, r, h, diag.astype(complex), float(lam), closure)


# ---------------------------------------------------------------------------
# transparent closure and the lattice Jost function


def exterior_ratio(sector: AngularSector, z, h: float, r_last: float):
    """mu(z) = w(r_last + h) / w(r_last) for the decaying exterior solution w.

    Real positive z is read as the boundary value from the lower half-plane.
    """
    z = np.asarray(z, dtype=complex)
    kappa = decay_constant(z, from_below=True)
    if abs(sector.nu - 0.5) < 1e-14:
        # decaying root of mu^2 - (2 - h^2 z) mu + 1 = 0
        b = 2.0 - h * h * z
        disc = np.sqrt(b * b - 4.0 + 0j)
        m1 = 0.5 * (b + disc)
        m2 = 0.5 * (b - disc)
        guess = np.exp(-kappa * h)
        mu = np.where(np.abs(m1 - guess) <= np.abs(m2 - guess), m1, m2)
        return mu[()] if mu.ndim == 0 else mu
    r0, r1 = r_last, r_last + h
    nu = sector.nu
    small = np.abs(kappa) * r1 < 1e-12
    ks = np.where(small, 1.0, kappa)
    with np.errstate(all="ignore"):
        ratio = math.sqrt(r1 / r0) * sps.kve(nu, ks * r1) / sps.kve(nu, ks * r0) * np.exp(-ks * h)
    ratio = np.where(small, (r1 / r0) ** (0.5 - nu), ratio)
    return ratio[()] if ratio.ndim == 0 else ratio


def _ratio_derivative(sector, z, h, r_last):
    z = np.asarray(z, dtype=complex)
    if abs(sector.nu - 0.5) < 1e-14:
        mu = exterior_ratio(sector, z, h, r_last)
        return -h * h * mu * mu / (mu * mu - 1.0)
    step = 1e-6 * np.maximum(np.abs(z), 1e-4)
    # centred difference in the lower half-plane direction keeps clear of the cut
    return (exterior_ratio(sector, z - 1j * step, h, r_last) - exterior_ratio(sector, z + 1j * step, h, r_last)) / (
        -2j * step
    )


def jost(op: DiscreteOperator, z, derivative: bool = False):
    """Lattice Jost function J(z) = u_{N+1} - mu(z) u_N (transparent closure).

    u solves the interior recurrence from u_0 = 0, u_1 = 1.  J(z) equals
    det(h^2 (A(z) - z)) up to a positive factor, so its zeros are the
    eigenvalues with multiplicity.  Vectorized over ``z``; the recurrence is
    rescaled by positive reals, which leaves zeros and phases unchanged.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    h2 = op.h * op.h
    coef = (op.diag * h2)[:, None] - h2 * z[None, :]  # 2 + h^2 (d_i - z)
    u_prev = np.zeros_like(z)
    u = np.ones_like(z)
    v_prev = np.zeros_like(z)
    v = np.zeros_like(z)
    for i in range(op.size):
        u_next = coef[i] * u - u_prev
        if derivative:
            v_next = coef[i] * v - h2 * u - v_prev
            v_prev, v = v, v_next
        u_prev, u = u, u_next
        big = np.abs(u) > 1e100
        if np.any(big):
            s = np.where(big, 1e-100, 1.0)
            u, u_prev = u * s, u_prev * s
            if derivative:
                v, v_prev = v * s, v_prev * s
    mu = exterior_ratio(op.sector, z, op.h, op.r[-1])
    J = u - mu * u_prev
    if not derivative:
        return J
    dmu = _ratio_derivative(op.sector, z, op.h, op.r[-1])
    return J, v - mu * v_prev - dmu * u_prev


def newton_roots(op: DiscreteOperator, seeds, tol: float = 1e-10, max_iter: int = 60):
    """Newton on J from many seeds at once; returns (roots, converged) arrays.

    The recurrence loses a few digits over N steps, so steps stall near
    1e-11..1e-9 relative; convergence is declared at ``tol`` or when a step
    below 1e-7 relative stops shrinking.  Steps are capped to |z|/2 so
    iterates cannot jump across the threshold, and iterates are kept in the
    closed lower half-plane where the closure is defined.
    """
    z = np.atleast_1d(np.asarray(seeds, dtype=complex)).copy()
    done = np.zeros(z.shape, dtype=bool)
    alive = np.ones(z.shape, dtype=bool)
    prev = np.full(z.shape, np.inf)
    for _ in range(max_iter):
        act = np.nonzero(alive & ~done)[0]
        if act.size == 0:
            break
        J, dJ = jost(op, z[act], derivative=True)
        with np.errstate(all="ignore"):
            step = np.where(J == 0, 0.0, J / dJ)
        bad = ~np.isfinite(step)
        alive[act[bad]] = False
        step = np.where(bad, 0.0, step)
        cap = np.maximum(0.5 * np.abs(z[act]), 1e-12)
        big = np.abs(step) > cap
        step = np.where(big, step * cap / np.maximum(np.abs(step), 1e-300), step)
        old = z[act]
        new = old - step
        flip = (new.imag > 0) & (old.imag <= 0)
        new = np.where(flip, new.real + 0.5j * old.imag, new)
        z[act] = new
        size = np.abs(step) / np.maximum(np.abs(new), 1e-14)
        conv = (size <= tol) | ((size <= 1e-7) & (np.abs(step) > 0.3 * prev[act])) | (J == 0)
        done[act[conv & ~bad]] = True
        prev[act] = np.abs(step)
    return z, done & alive


def newton_root(op: DiscreteOperator, z0: complex, tol: float = 1e-10, max_iter: int = 60, region=None):
    """Single-seed form of :func:`newton_roots`; returns (z, converged)."""
    z, ok = newton_roots(op, [z0], tol, max_iter)
    z, ok = complex(z[0]), bool(ok[0])
    if region is not None and abs(z - region.center) > 4 * region.radius + 1.0:
        ok = False
    return z, ok


# ---------------------------------------------------------------------------
# regions and the argument principle


@dataclass(frozen=True)
class HalfDisk:
    """D_-(center, radius) = {|z - center| < radius, Im z < 0}."""

    center: float
    radius: float

    def contains(self, z, margin: float = 0.0) -> bool:
        return abs(z - self.center) < self.radius - margin and z.imag < 0.0

    def boundary(self, t):
        """Counter-clockwise boundary for t in [0, 2): arc for t < 1, real segment after."""
        t = np.asarray(t, dtype=float)
        arc = self.center + self.radius * np.exp(1j * np.pi * (1.0 + t))
        # rounding can leave +1e-17 at the arc ends, i.e. the wrong side of the cut
        arc = arc.real + 1j * np.minimum(arc.imag, 0.0)
        seg = self.center + self.radius * (1.0 - 2.0 * (t - 1.0)) + 0j
        return np.where(t < 1.0, arc, seg)

    def describe(self) -> str:
        return f"D-({self.center:g}, {self.radius:g})"


@dataclass(frozen=True)
class Disk:
    """Full open disk |z - center| < radius, for contours away from [0, inf)."""

    center: complex
    radius: float

    def contains(self, z, margin: float = 0.0) -> bool:
        return abs(z - self.center) < self.radius - margin

    def boundary(self, t):
        """Counter-clockwise circle for t in [0, 2)."""
        t = np.asarray(t, dtype=float)
        return self.center + self.radius * np.exp(1j * np.pi * t)

    def describe(self) -> str:
        return f"D({self.center:g}, {self.radius:g})"


def count_zeros(fn: Callable, region: HalfDisk, initial: int = 256, max_points: int = 200000):
    """Winding number of fn along the boundary of ``region``.

    Samples are bisected until consecutive phases differ by less than pi/4.
    Returns (count, diagnostics); the count is None when the total is not
    within 0.05 of an integer or fn nearly vanishes on the contour.
    """
    t = np.linspace(0.0, 2.0, initial + 1)
    vals = fn(region.boundary(t))
    while True:
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(dphi) > np.pi / 4
        if not np.any(bad) or t.size > max_points:
            break
        mids = 0.5 * (t[:-1][bad] + t[1:][bad])
        new_vals = fn(region.boundary(mids))
        t = np.concatenate([t, mids])
        vals = np.concatenate([vals, new_vals])
        order = np.argsort(t, kind="stable")
        t, vals = t[order], vals[order]
    total = float(np.sum(np.angle(vals[1:] / vals[:-1]))) / (2 * np.pi)
    mags = np.abs(vals)
    diag = {
        "winding": total,
        "samples": int(t.size),
        "min_abs_over_median": float(mags.min() / np.median(mags)),
    }
    n = round(total)
    if abs(total - n) > 0.05 or t.size > max_points:
        return None, diag
    return int(n), diag


def locate_roots(op: DiscreteOperator, region: HalfDisk, seeds: Sequence[complex] = (), grid: int = 8):
    """Zeros of the Jost function inside ``region`` found by Newton from seeds.

    Besides the given seeds, a polar grid of starting points (radii spaced
    geometrically towards the centre) is used.  Roots are deduplicated at
    1e-6 relative distance, above the Newton noise floor.
    """
    radii = region.radius * np.geomspace(0.02, 0.9, grid)
    angles = np.linspace(np.pi * 1.05, np.pi * 1.95, grid)
    starts = np.concatenate(
        [np.asarray(list(seeds), dtype=complex), (region.center + radii[:, None] * np.exp(1j * angles[None, :])).ravel()]
    )
    zs, ok = newton_roots(op, starts)
    roots: list[complex] = []
    for z, good in zip(zs, ok):
        z = complex(z)
        if not good or not region.contains(z):
            continue
        if all(abs(z - w) > 1e-6 * max(abs(w), 1e-12) for w in roots):
            roots.append(z)
    return sorted(roots, key=lambda w: (w.real, w.imag))


# ---------------------------------------------------------------------------
# dense spectrum and the confirmation protocol


def complex_spectrum(op, check: bool = True) -> np.ndarray:
    """All eigenvalues of a dense or discrete operator via LAPACK (Hessenberg QR).

    With ``check`` the backward error max ||A v - z v|| / ||A|| is verified
    against 1e-10 using the computed right eigenvectors.
    """
    a = op.dense() if isinstance(op, DiscreteOperator) else np.asarray(op, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("complex_spectrum needs a square matrix")
    if a.shape[0] > 8000:
        raise ValueError(f"matrix size {a.shape[0]} exceeds the dense budget 8000")
    try:
        if not check:
            return sla.eigvals(a)
        w, v = sla.eig(a)
    except sla.LinAlgError as exc:
        raise sla.LinAlgError(
            f"eigenvalue iteration failed: size={a.shape[0]}, norm={np.linalg.norm(a, 1):.3e}, "
            f"finite={np.isfinite(a).all()}"
        ) from exc
    norm = max(np.linalg.norm(a, 2) if a.shape[0] <= 64 else np.linalg.norm(a, 1), 1e-300)
    res = np.linalg.norm(a @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
    if res.max() > 1e-10 * norm:
        raise sla.LinAlgError(f"backward error {res.max() / norm:.2e} exceeds 1e-10")
    return w


def cluster(values, radius: float):
    """Group values closer than ``radius`` (single linkage); returns [(mean, size)]."""
    vals = list(np.asarray(values, dtype=complex))
    groups: list[list[complex]] = []
    for v in vals:
        hits = [g for g in groups if any(abs(v - w) <= radius for w in g)]
        merged = [v]
        for g in hits:
            merged.extend(g)
            groups.remove(g)
        groups.append(merged)
    return [(complex(np.mean(g)), len(g)) for g in groups]


@dataclass(frozen=True)
class Eigenvalue:
    z: complex
    multiplicity: int
    confirmed: bool
    drift: float = float("nan")
    outer_mass: float = float("nan")
    ambiguous: bool = False


@dataclass
class SpectrumReport:
    eigenvalues: list
    region: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return sum(e.multiplicity for e in self.eigenvalues if e.confirmed)

    @property
    def confirmed(self) -> list:
        return [e for e in self.eigenvalues if e.confirmed]

    @property
    def ambiguous(self) -> bool:
        return any(e.ambiguous for e in self.eigenvalues)


def inverse_iteration(op: DiscreteOperator, shift: complex, max_iter: int = 40, tol: float = 1e-12):
    """Rayleigh-quotient iteration with the bilinear quotient v^T A v / v^T v.

    Returns (eigenvalue, vector).  The bilinear form is the natural one for
    complex-symmetric matrices.
    """
    a = op.matrix()
    n = op.size
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n) + 0j
    sigma = complex(shift)
    z = sigma
    for it in range(max_iter):
        try:
            lu = spla.splu((a - sigma * sp.identity(n, format="csc")).tocsc())
        except RuntimeError:  # exactly singular: shift is an eigenvalue
            sigma += 1e-13 * max(abs(sigma), 1.0)
            continue
        for _ in range(2):
            v = lu.solve(v)
            v /= np.linalg.norm(v)
        z_new = complex(v @ (a @ v) / (v @ v))
        if abs(z_new - z) <= tol * max(abs(z_new), 1e-300) and it > 0:
            return z_new, v
        z = z_new
        if it >= 2:
            sigma = z
    return z, v


def transparent_spectrum(op: DiscreteOperator, branch_tol: float = 1e-8) -> np.ndarray:
    """All eigenvalues of the transparent lattice for nu = 1/2, from one dense solve.

    The closure ratio mu solves mu^2 - (2 - h^2 z) mu + 1 = 0, so after the
    substitution z = (2 - mu - 1/mu)/h^2 the nonlinear problem becomes the
    quadratic pencil mu^2 (I - e e^T) + mu (h^2 A0 - 2 I) + I.  In w = 1/mu
    it is monic, w^2 + w (h^2 A0 - 2 I) + (I - e e^T), so a standard
    companion eigenproblem suffices.  Only roots whose mu is the decaying
    branch at z are kept; the others lie on the unphysical sheet.
    """
    if abs(op.sector.nu - 0.5) > 1e-14:
        raise ValueError("transparent_spectrum needs channel order 1/2")
    n, h2 = op.size, op.h * op.h
    a0 = op.with_closure("dirichlet").dense()
    if op.lam == 0:
        a0 = a0.real
    eye = np.eye(n)
    m0 = eye.copy()
    m0[-1, -1] = 0.0
    comp = np.block([[np.zeros((n, n)), eye], [-m0, -(h2 * a0 - 2.0 * eye)]])
    w = sla.eigvals(comp)
    w = w[np.abs(w) > 1e-12]
    mu = 1.0 / w
    z = (2.0 - mu - 1.0 / mu) / h2
    keep = np.abs(exterior_ratio(op.sector, z, op.h, op.r_max - op.h) - mu) <= branch_tol * np.maximum(np.abs(mu), 1.0)
    return np.sort_complex(z[keep])


def _refined(pot, sector, lam, r_max, n_points):
    return discretize(pot, sector, lam, r_max=r_max, n_points=n_points)


def confirm_point_spectrum(
    pot: RadialPotential,
    sector: AngularSector,
    lam: float,
    candidates,
    r_max: float = 40.0,
    n_points: int = 799,
    stability: float = 1e-4,
    outer_fraction: float = 0.2,
    outer_mass: float = 0.01,
    window: float | None = 10.0,
) -> SpectrumReport:
    """Separate eigenvalues from discretization artifacts (Dirichlet closure).

    A candidate is confirmed when it is stable to ``stability`` (relative)
    under both h -> h/2 and r_max -> 2.1 r_max and its eigenvector carries less
    than ``outer_mass`` of its norm in the outer ``outer_fraction`` of the
    box.  The h test compares Richardson-extrapolated values from the pairs
    (h, h/2) and (h/2, h/4), so second-order convergence on grids with the
    potential's jumps on nodes passes it; the r_max test compares raw values.
    Multiplicities are sizes of clusters of confirmed candidates at radius
    10 x drift; unconfirmed candidates are listed singly.  Candidates with
    |z| > ``window`` are not examined.
    """
    base = _refined(pot, sector, lam, r_max, n_points)
    fine = _refined(pot, sector, lam, r_max, 2 * n_points + 1)
    finer = _refined(pot, sector, lam, r_max, 4 * n_points + 3)
    # 2 r_max alone is commensurate with the base box (free modes (k pi/R)^2
    # reappear exactly).  The wide box is stretched by ~10% at the same h, with
    # interval counts coprime so coincidences only occur at mode numbers ~ N.
    extra = max(1, round(0.1 * (n_points + 1)))
    while math.gcd(2 * (n_points + 1) + extra, n_points + 1) != 1:
        extra += 1
    h = r_max / (n_points + 1)
    wide = _refined(pot, sector, lam, (2 * (n_points + 1) + extra) * h, 2 * (n_points + 1) + extra - 1)
    cands = np.asarray(list(candidates), dtype=complex)
    if window is not None:
        cands = cands[np.abs(cands) <= window]
    results = []
    for c in cands:
        z0, v0 = inverse_iteration(base, c)
        z1, _ = inverse_iteration(fine, z0)
        z3, _ = inverse_iteration(finer, z1)
        z2, _ = inverse_iteration(wide, z0)
        rich0 = (4.0 * z1 - z0) / 3.0
        rich1 = (4.0 * z3 - z1) / 3.0
        scale = max(abs(rich1), 1e-14)
        drift = max(abs(rich1 - rich0), abs(z2 - z0)) / scale
        stable = drift <= stability
        k = int(round((1.0 - outer_fraction) * base.size))
        mass = float(np.sum(np.abs(v0[k:]) ** 2) / np.sum(np.abs(v0) ** 2))
        localized = mass < outer_mass
        ambiguous = stable != localized
        if ambiguous:
            warnings.warn(
                f"candidate {z0:.6g}: stable={stable} (drift {drift:.2e}) but localized={localized} (mass {mass:.2e})",
                ConfirmationWarning,
                stacklevel=2,
            )
        results.append((rich1 if stable else z0, drift, mass, stable and localized, ambiguous))
    eigs = []
    used = [False] * len(results)
    for i, (z, drift, mass, ok, amb) in enumerate(results):
        if used[i]:
            continue
        if ok:
            rad = 10.0 * max(drift * abs(z), 1e-12)
            members = [j for j, rr in enumerate(results) if not used[j] and rr[3] and abs(rr[0] - z) <= rad]
        else:
            members = [i]
        for j in members:
            used[j] = True
        eigs.append(Eigenvalue(complex(z), len(members), bool(ok), float(drift), mass, bool(amb)))
    return SpectrumReport(eigs, region=f"|z| <= {window}" if window is not None else "all")


# ---------------------------------------------------------------------------
# Birman-Schwinger operator


def birman_schwinger_norm(
    pot: RadialPotential,
    sector: AngularSector,
    lam: float,
    z: complex,
    r_max: float = 8.0,
    n_points: int = 799,
    singular_tol: float = 1e-8,
) -> float:
    """lambda * || |V2|^{1/2} (H1 - z)^{-1} |V2|^{1/2} || on the transparent lattice.

    Raises NearSingularError when z is within ``singular_tol`` of an
    eigenvalue of H1 (estimated by the Newton step length on the Jost function).
    """
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise ValueError("z must lie off [0, inf)")
    if lam == 0.0:
        return 0.0
    op = discretize(pot, sector, 0.0, r_max=r_max, n_points=n_points, closure="transparent")
    J, dJ = jost(op, z, derivative=True)
    if abs(J[0]) <= singular_tol * abs(dJ[0]):
        raise NearSingularError(f"z={z} lies within {singular_tol} of an eigenvalue of H1")
    s = np.sqrt(np.abs(pot.V2(op.r)))
    idx = np.nonzero(s)[0]
    if idx.size == 0:
        return 0.0
    rhs = np.zeros((op.size, idx.size), dtype=complex)
    rhs[idx, np.arange(idx.size)] = s[idx]
    x = sla.solve_banded((1, 1), op.banded(z, shift=z), rhs)
    m = s[idx, None] * x[idx, :]
    return float(abs(lam) * np.linalg.norm(m, 2))
