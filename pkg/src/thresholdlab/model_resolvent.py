"""Low-energy structure of the model resolvent (Q_nu - z)^{-1} on one angular sector.

Q_nu = -d^2/dr^2 - (n-1)/r d/dr + lambda_nu / r^2 acts on L^2(R_+, r^{n-1} dr).
Its resolvent has an expansion around z = 0 whose singular part is carried by
finite-rank kernels G_{nu,j}, written out in closed form here.  The Green
function built from I_nu and K_nu serves as an independent reference.

Sector functions ``f(r)`` stand for ``f(r) Y(theta)`` with a normalized
spherical function ``Y``; pairings are ``<g, f> = int conj(g) f r^{n-1} dr``
(conjugate-linear in the first slot).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.special as sps

from .specfun import DomainError, PolyNuK, bessel, gamma, p_poly_coefficients

__all__ = [
    "AngularSector",
    "KernelTerm",
    "RadialGrid",
    "QuadratureError",
    "log_grid",
    "branch_log",
    "branch_sqrt",
    "decay_constant",
    "z_nu",
    "z_nu_sector",
    "gamma_nu",
    "kernel_term",
    "kernel_G",
    "singular_pairing",
    "pair",
    "resolvent_oracle",
    "zero_energy_oracle",
    "ExpansionProbe",
    "expansion_remainder",
]


class QuadratureError(ArithmeticError):
    """Oracle output failed its finite-difference residual check."""


def _sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class AngularSector:
    """One eigen-channel of -Delta_{S^{n-1}} + q on the sphere.

    ``q`` is a constant inverse-square coefficient; with q = 0 the channel
    eigenvalue is ell (ell + n - 2).
    """

    n: int
    ell: int = 0
    q: float = 0.0

    def __post_init__(self):
        if self.n not in (3, 4):
            raise DomainError(f"dimension n={self.n} not supported (n in {{3, 4}})")
        if self.ell < 0:
            raise DomainError(f"ell={self.ell} must be >= 0")
        if not self.nu > 0.0:
            raise DomainError(
                f"sector (n={self.n}, ell={self.ell}, q={self.q}) has nu={self.nu}; "
                "the lowest channel must lie strictly above -(n-2)^2/4"
            )

    @classmethod
    def with_nu(cls, n: int, nu: float) -> "AngularSector":
        """Sector with ell = 0 and q tuned so that the order equals ``nu``."""
        return cls(n=n, ell=0, q=nu * nu - (n - 2) ** 2 / 4.0)

    @property
    def lambda_nu(self) -> float:
        return self.ell * (self.ell + self.n - 2) + self.q

    @cached_property
    def nu(self) -> float:
        val = self.lambda_nu + (self.n - 2) ** 2 / 4.0
        return math.sqrt(val) if val > 0 else 0.0 if val == 0 else -1.0

    @property
    def is_integer(self) -> bool:
        # snap: the non-integer kernels carry 1/sin(pi nu') and are useless this close
        return abs(self.nu - round(self.nu)) < 1e-12

    @property
    def nu_floor(self) -> int:
        return int(round(self.nu)) if self.is_integer else math.floor(self.nu)

    @property
    def nu_frac(self) -> float:
        return 0.0 if self.is_integer else self.nu - self.nu_floor

    @property
    def nu_floor_minus(self) -> int:
        """Largest integer strictly below nu (0 when nu = 0)."""
        if self.nu == 0.0:
            return 0
        return self.nu_floor - 1 if self.is_integer else self.nu_floor

    @property
    def delta_nu(self) -> int:
        return 1 if self.is_integer else 0

    @property
    def eta0_coeff(self) -> float:
        """Value of the constant spherical function 1/sqrt|S^{n-1}|."""
        return 1.0 / math.sqrt(_sphere_area(self.n))

    @property
    def degeneracy(self) -> int:
        """Dimension of the spherical-harmonic space of degree ell."""
        if self.n == 3:
            return 2 * self.ell + 1
        return (self.ell + 1) ** 2

    @property
    def centrifugal(self) -> float:
        """Coefficient of 1/r^2 in the reduced equation for u = r^{(n-1)/2} psi."""
        return self.nu**2 - 0.25


# ---------------------------------------------------------------------------
# branches


def branch_log(z):
    """log z with arg z in (0, 2 pi), i.e. continuous from above onto (0, inf)."""
    z = np.asarray(z, dtype=complex)
    bad = (z.imag == 0.0) & (z.real >= 0.0)
    if np.any(bad):
        raise DomainError("branch_log: z lies on the cut [0, inf)")
    arg = np.angle(z)
    arg = np.where(arg <= 0.0, arg + 2.0 * np.pi, arg)
    out = np.log(np.abs(z)) + 1j * arg
    return out[()] if out.ndim == 0 else out


def branch_sqrt(z):
    """z^{1/2} on the same branch; lies in the closed upper half-plane."""
    return np.exp(0.5 * branch_log(z))


def decay_constant(z, from_below: bool = True):
    """kappa = sqrt(-z) with Re kappa >= 0.

    Points of [0, inf) are read as boundary values from the lower half-plane
    when ``from_below`` (where dissipative eigenvalues live), else from above.
    """
    z = np.asarray(z, dtype=complex)
    on_cut = (z.imag == 0.0) & (z.real >= 0.0)
    root = np.sqrt(np.abs(z.real))
    kappa = np.where(on_cut, (1j if from_below else -1j) * root, np.sqrt(-z))
    return kappa[()] if kappa.ndim == 0 else kappa


def z_nu(z, nu1: float):
    """e^{nu1 log z} for nu1 in (0, 1), z log z for nu1 = 1."""
    if not 0.0 < nu1 <= 1.0:
        raise DomainError(f"z_nu: nu1={nu1} outside (0, 1]")
    lz = branch_log(z)
    if abs(nu1 - 1.0) < 1e-14:
        return np.asarray(z, dtype=complex) * lz
    return np.exp(nu1 * lz)


def z_nu_sector(z, sector: AngularSector):
    """z^{nu'} for non-integer nu, z log z for integer nu."""
    lz = branch_log(z)
    if sector.is_integer:
        return np.asarray(z, dtype=complex) * lz
    return np.exp(sector.nu_frac * lz)


def gamma_nu(nu: float) -> complex:
    """Coefficient of the leading singular kernel for nu in [0, 1]."""
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"gamma_nu: nu={nu} outside [0, 1]")
    if nu == 0.0:
        return complex(-0.5)
    if nu == 1.0:
        return complex(-0.125)
    return complex(
        -np.exp(-1j * np.pi * nu) * gamma(1.0 - nu) / (nu * 2.0 ** (2 * nu + 1) * gamma(1.0 + nu))
    )


# ---------------------------------------------------------------------------
# finite-rank kernels


@dataclass(frozen=True)
class KernelTerm:
    """G_{nu,j}(r, tau) = prefactor * (r tau)^power * poly(rho)."""

    sector: AngularSector
    j: int
    prefactor: complex
    power: float
    poly: PolyNuK

    def __call__(self, r, tau):
        r = np.asarray(r, dtype=float)
        tau = np.asarray(tau, dtype=float)
        rho = (r * r + tau * tau) / (4.0 * r * tau)
        return self.prefactor * (r * tau) ** self.power * self.poly(rho)


def kernel_term(sector: AngularSector, j: int) -> KernelTerm:
    n, nu = sector.n, sector.nu
    base = -(n - 2) / 2.0
    if sector.is_integer:
        l = sector.nu_floor
        if j < l:
            raise DomainError(f"G_{{{nu},{j}}}: need j >= {l} for integer order")
        pref = (-1.0) ** (j + l + 1) / (
            math.sqrt(math.pi) * 2.0 ** (2 * l + 1) * math.factorial(j) * math.factorial(j - l) * gamma(l + 0.5)
        )
        return KernelTerm(sector, j, complex(pref), base + j, p_poly_coefficients(l, j - l))
    fl = sector.nu_floor
    if j < fl:
        raise DomainError(f"G_{{{nu},{j}}}: need j >= [nu] = {fl}")
    nup = sector.nu_frac
    rising = math.prod(nup + i for i in range(j + 1))
    pref = (
        (-1.0) ** (j + 1 - fl)
        * np.exp(-1j * nup * np.pi)
        * gamma(1.0 - nup)
        / (2.0 ** (2 * nu + 1) * math.sqrt(math.pi) * math.factorial(j - fl) * gamma(0.5 + nu) * rising)
    )
    return KernelTerm(sector, j, complex(pref), base + nup + j, p_poly_coefficients(nu, j - fl))


def kernel_G(sector: AngularSector, j: int, r, tau):
    """Schwartz kernel of G_{nu,j} with respect to r^{n-1} dr."""
    return kernel_term(sector, j)(r, tau)


# ---------------------------------------------------------------------------
# radial grids and quadrature


@dataclass(frozen=True)
class RadialGrid:
    """Logarithmically uniform grid r_i = exp(s_i) for the Green-function oracle."""

    r: np.ndarray = field(repr=False)
    ds: float

    @property
    def s(self) -> np.ndarray:
        return np.log(self.r)

    def coarsened(self) -> "RadialGrid":
        return RadialGrid(self.r[::2], 2.0 * self.ds)

    def integrate(self, values) -> complex:
        """int values(s) ds by the trapezoid rule (integrands decay at both ends)."""
        v = np.asarray(values)
        return self.ds * (v.sum() - 0.5 * (v[0] + v[-1]))


def log_grid(r_min: float = 1e-6, r_max: float = 40.0, n_points: int = 4001) -> RadialGrid:
    if n_points % 2 == 0:
        n_points += 1
    s = np.linspace(math.log(r_min), math.log(r_max), n_points)
    return RadialGrid(np.exp(s), float(s[1] - s[0]))


def pair(g, u, grid: RadialGrid, n: int) -> complex:
    """<g, u> = int conj(g) u r^{n-1} dr."""
    return complex(grid.integrate(np.conj(g) * u * grid.r**n))


def _cumulative(values, ds):
    """Running integral from the left end, trapezoid plus Euler-Maclaurin end correction."""
    v = np.asarray(values)
    out = np.empty_like(v)
    out[0] = 0.0
    out[1:] = np.cumsum(0.5 * ds * (v[1:] + v[:-1]))
    dv = np.gradient(v, ds, edge_order=2)
    out -= ds * ds / 12.0 * (dv - dv[0])
    return out


def _bessel_pair(nu: float, kappa: complex, r: np.ndarray):
    """I_nu(kappa r), K_nu(kappa r) on the grid."""
    if kappa.imag == 0.0 and kappa.real > 0.0:
        x = kappa.real * r
        iv = np.array([bessel("I", nu, xi) for xi in x])
        kv = np.array([bessel("K", nu, xi) for xi in x])
        return iv.astype(complex), kv.astype(complex)
    x = kappa * r
    iv = sps.ive(nu, x) * np.exp(np.abs(x.real))
    kv = sps.kve(nu, x) * np.exp(-x)
    return iv, kv


def _apply_green(sector, left, right, f, grid):
    """u(r) = r^{-(n-2)/2} [right(r) int_0^r left f + left(r) int_r^inf right f]."""
    n = sector.n
    r = grid.r
    weight = r ** (n / 2.0 + 1.0) * f  # tau^{n/2} f(tau) d tau = tau^{n/2+1} f ds
    a = _cumulative(left * weight, grid.ds)
    b_all = _cumulative(right * weight, grid.ds)
    b = b_all[-1] - b_all
    return r ** (-(n - 2) / 2.0) * (right * a + left * b)


def _qnu_residual(sector, z, u, f, grid):
    """Relative residual of (Q_nu - z) u = f on interior nodes, 6th-order stencils in s."""
    ds = grid.ds
    m3, m2, m1, c, p1, p2, p3 = (u[i : len(u) - 6 + i] for i in range(7))
    us = (-m3 + 9 * m2 - 45 * m1 + 45 * p1 - 9 * p2 + p3) / (60 * ds)
    uss = (2 * m3 - 27 * m2 + 270 * m1 - 490 * c + 270 * p1 - 27 * p2 + 2 * p3) / (180 * ds * ds)
    r = grid.r[3:-3]
    q_u = -(uss + (sector.n - 2) * us - sector.lambda_nu * c) / (r * r)
    res = q_u - z * c - f[3:-3]
    w = r**sector.n
    num = math.sqrt(float(np.sum(np.abs(res) ** 2 * w)))
    den = math.sqrt(float(np.sum(np.abs(f[3:-3]) ** 2 * w)))
    return num / den


def resolvent_oracle(sector: AngularSector, z, f, grid: RadialGrid, check: bool = True, tol: float = 1e-6):
    """(Q_nu - z)^{-1} f via the kernel (r tau)^{-(n-2)/2} I_nu(kappa r_<) K_nu(kappa r_>).

    kappa = sqrt(-z) with Re kappa > 0.  The kernel is the Green function of the
    Bessel operator after u = r^{-(n-2)/2} w, normalized by the Wronskian
    W(K_nu, I_nu)(x) = 1/x.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise DomainError("resolvent_oracle: z must lie off [0, inf)")
    kappa = complex(np.sqrt(-z))
    f = np.asarray(f, dtype=complex)
    iv, kv = _bessel_pair(sector.nu, kappa, grid.r)
    u = _apply_green(sector, iv, kv, f, grid)
    if check:
        res = _qnu_residual(sector, z, u, f, grid)
        if not res <= tol:
            raise QuadratureError(f"oracle residual {res:.3e} exceeds {tol:.1e}; refine the grid")
    return u


def zero_energy_oracle(sector: AngularSector, f, grid: RadialGrid):
    """Q_nu^{-1} f: the kernel (r tau)^{-(n-2)/2} (r_</r_>)^nu / (2 nu)."""
    nu = sector.nu
    r = grid.r
    left = r**nu / math.sqrt(2.0 * nu)
    right = r ** (-nu) / math.sqrt(2.0 * nu)
    return _apply_green(sector, left.astype(complex), right.astype(complex), np.asarray(f, dtype=complex), grid)


def singular_pairing(sector: AngularSector, j: int, f, g, grid: RadialGrid) -> complex:
    """<g, G_{nu,j} f>, using that (r tau)^p P(rho) separates into monomials."""
    term = kernel_term(sector, j)
    n = sector.n
    r = grid.r
    g = np.asarray(g, dtype=complex)
    f = np.asarray(f, dtype=complex)

    def mom_g(a):
        return grid.integrate(np.conj(g) * r ** (a + n))

    def mom_f(b):
        return grid.integrate(f * r ** (b + n))

    p = term.power
    total = 0j
    for m, c in enumerate(term.poly.coefficients):
        if c == 0.0:
            continue
        # rho^m = 4^{-m} (r tau)^{-m} sum_i C(m,i) r^{2i} tau^{2(m-i)}
        for i in range(m + 1):
            total += c * 4.0 ** (-m) * math.comb(m, i) * mom_g(p - m + 2 * i) * mom_f(p + m - 2 * i)
    return complex(term.prefactor * total)


# ---------------------------------------------------------------------------
# expansion remainder


def _singular_terms(sector: AngularSector, order: int):
    """(j, power-function) pairs for the singular part of the expansion truncated at ``order``."""
    nu = sector.nu
    if nu == 0.0:  # pragma: no cover - sectors are built with nu > 0
        raise DomainError("the log z G_{0,0} channel is excluded by construction")
    out = []
    if nu > order:
        return out
    for j in range(sector.nu_floor_minus, order):
        idx = j + sector.delta_nu
        out.append((idx, j))
    return out


class ExpansionProbe:
    """Compare <g, R(z) f> with its low-energy expansion on one sector.

    The singular coefficients come from the closed-form kernels; the smooth
    coefficients F_j (j >= 1) have no closed form and are fitted by least
    squares on sample points off the measurement ray, after the singular part
    has been subtracted.  F_0 is the zero-energy pairing.
    """

    def __init__(
        self,
        sector: AngularSector,
        f,
        g,
        grid: RadialGrid,
        order: int = 1,
        fit_moduli=None,
        fit_args=(0.5 * np.pi, 0.75 * np.pi, np.pi, 1.5 * np.pi, 1.75 * np.pi),
    ):
        self.sector = sector
        self.grid = grid
        self.order = order
        self.f = np.asarray(f, dtype=complex)
        self.g = np.asarray(g, dtype=complex)
        self.f0 = pair(self.g, zero_energy_oracle(sector, self.f, grid), grid, sector.n)
        fit_order = order + 1
        self._sing = {
            idx: singular_pairing(sector, idx, self.f, self.g, grid)
            for idx, _ in _singular_terms(sector, fit_order)
        }
        if fit_moduli is None:
            fit_moduli = np.logspace(-3.5, -1.5, 9)
        zs = np.array([m * np.exp(1j * a) for m in fit_moduli for a in fit_args])
        y = np.array([self.pairing(z) for z in zs]) - self.f0
        y -= np.array([self._singular_sum(z, fit_order) for z in zs])
        cols = np.array([[z**j for j in range(1, fit_order + 1)] for z in zs])
        scale = np.abs(cols).max(axis=0)
        coef, *_ = np.linalg.lstsq(cols / scale, y, rcond=None)
        self.smooth = coef / scale  # F_1, F_2, ...

    def pairing(self, z) -> complex:
        u = resolvent_oracle(self.sector, z, self.f, self.grid, check=False)
        return pair(self.g, u, self.grid, self.sector.n)

    def _singular_sum(self, z, order):
        zn = complex(z_nu_sector(z, self.sector))
        return sum(zn * z**j * self._sing[idx] for idx, j in _singular_terms(self.sector, order))

    def singular_coefficient(self) -> complex:
        """Coefficient of the leading singular power z_nu z^{[nu]_-}."""
        terms = _singular_terms(self.sector, max(self.order, math.ceil(self.sector.nu)))
        return self._sing.get(terms[0][0]) if terms else 0j

    def fitted_singular_coefficient(self, moduli=None, arg: float = 1.25 * np.pi) -> complex:
        """Leading singular coefficient fitted from oracle data alone.

        Fits <g, R(z) f> - F_0 on one ray with the generic basis
        z_nu z^{[nu]_-}, z, z_nu z^{[nu]_- + 1}, z^2 and returns the first coefficient;
        no closed-form kernel enters.
        """
        if moduli is None:
            moduli = np.logspace(-4.5, -2.0, 12)
        zs = moduli * np.exp(1j * arg)
        j0 = self.sector.nu_floor_minus
        y = np.array([self.pairing(z) for z in zs]) - self.f0
        zn = np.array([complex(z_nu_sector(z, self.sector)) for z in zs])
        cols = np.stack([zn * zs**j0, zs, zn * zs ** (j0 + 1), zs**2], axis=1)
        scale = np.abs(cols).max(axis=0)
        coef, *_ = np.linalg.lstsq(cols / scale, y, rcond=None)
        return complex(coef[0] / scale[0])

    def truncation(self, z, include_singular: bool = True) -> complex:
        val = self.f0 + sum(self.smooth[j - 1] * z**j for j in range(1, self.order + 1))
        if include_singular:
            val += self._singular_sum(z, self.order)
        return complex(val)

    def remainder(self, z, include_singular: bool = True) -> float:
        return abs(self.pairing(z) - self.truncation(z, include_singular))


def expansion_remainder(sector: AngularSector, z, f, g, grid: RadialGrid, N: int = 1) -> float:
    """|<g, R(z) f> - truncation of order N|; see :class:`ExpansionProbe`."""
    return ExpansionProbe(sector, f, g, grid, order=N).remainder(z)
