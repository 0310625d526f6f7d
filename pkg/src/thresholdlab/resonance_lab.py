"""Zero-energy resonances of H1 = -Delta + V1 and the eigenvalue they emit under -i lambda V2.

Critical coupling is found by shooting the zero-energy equation.  With
u = r^{nu + 1/2} y the reduced sector equation becomes

    y'' + (2 nu + 1)/r y' = beta v1(r) y,    y(0) = 1, y'(0) = 0,

which is regular at the origin.  Where the potential vanishes
y = a + b r^{-2 nu}, so a = y + r y'/(2 nu) is the asymptotic constant; the
critical coupling is the first beta with a(beta) = 0.

The resonant state fixes the coefficients c1 = <W1 eta0, phi>,
c1' = <V2 eta0, phi> and v11 = <phi, V2 phi>, and the leading-order location
of the emitted eigenvalue follows from a scalar equation in z_nu(z).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson

from .model_resolvent import AngularSector, gamma_nu, z_nu
from .radial_operator import (
    HalfDisk,
    RadialPotential,
    discretize,
    jost,
    newton_root,
)

__all__ = [
    "BracketError",
    "NormalizationError",
    "AssumptionError",
    "ConvergenceError",
    "LostTrajectoryError",
    "QuadratureTailWarning",
    "ZeroEnergySolution",
    "shoot_zero_energy",
    "asymptotic_constant",
    "critical_coupling",
    "lattice_operator",
    "lattice_critical_coupling",
    "zero_energy_census",
    "ResonanceProfile",
    "resonant_state",
    "resonance_coefficients",
    "resonance_profile",
    "EmergentRoot",
    "leading_coefficient",
    "p_residual",
    "predict_eigenvalue",
    "solve_p2",
    "TrajectoryPoint",
    "track_trajectory",
]


class BracketError(ValueError):
    """a(beta) keeps its sign over the scanned couplings."""


class NormalizationError(ValueError):
    """<phi, -W1 phi> is not positive."""


class AssumptionError(ValueError):
    """Coefficients violate the sign condition needed by the prediction."""


class ConvergenceError(ArithmeticError):
    """Newton iteration failed; ``trace`` holds the iterates."""

    def __init__(self, msg, trace=()):
        super().__init__(msg)
        self.trace = list(trace)


class LostTrajectoryError(ArithmeticError):
    """Refined eigenvalue left the threshold half-disk."""


class QuadratureTailWarning(UserWarning):
    """The outer tenth of the quadrature grid carries a non-negligible share."""


def _as_potential(pot) -> RadialPotential:
    return pot if isinstance(pot, RadialPotential) else RadialPotential(pot)


# ---------------------------------------------------------------------------
# zero-energy shooting


@dataclass(frozen=True)
class ZeroEnergySolution:
    """Regular zero-energy solution at each coupling in ``betas``.

    ``y`` has shape (len(betas), len(r)); ``psi = r^{nu - (n-2)/2} y``.
    """

    sector: AngularSector
    betas: np.ndarray
    r: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    dy: np.ndarray = field(repr=False)
    pieces: tuple

    @property
    def a(self) -> np.ndarray:
        """Asymptotic constant y + r y'/(2 nu) at the outer end."""
        return self.y[:, -1] + self.r[-1] * self.dy[:, -1] / (2.0 * self.sector.nu)

    @property
    def psi(self) -> np.ndarray:
        nu, n = self.sector.nu, self.sector.n
        return self.r ** (nu - (n - 2) / 2.0) * self.y


def _pieces(pot: RadialPotential, step: float):
    """Integration intervals split at the potential's jumps, each with an even step count.

    The default step is support/1000 (at least 1e-3).
    """
    if step is None:
        step = max(1e-3, pot.support / 1000.0)
    edges = [0.0] + [b for b in pot.breakpoints if b < pot.support] + [pot.support]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = max(2, 2 * math.ceil((hi - lo) / (2 * step)))
        out.append((lo, hi, m))
    return tuple(out)


def shoot_zero_energy(pot, sector: AngularSector, betas, step: float | None = None, keep: bool = False):
    """Fixed-step RK4 for the regular zero-energy solution, vectorized over couplings.

    Inside each piece the potential is evaluated from that side of any jump.
    With ``keep`` the whole trajectory is stored, otherwise only the end point.
    """
    pot = _as_potential(pot)
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    nu = sector.nu
    c = 2.0 * nu + 1.0
    y = np.ones_like(betas)
    p = np.zeros_like(betas)
    rs, ys, ps = [0.0], [y.copy()], [p.copy()]
    pieces = _pieces(pot, step)
    for lo, hi, m in pieces:
        h = (hi - lo) / m
        eps = 1e-12 * (hi - lo)

        def vfun(r, lo=lo, hi=hi, eps=eps):
            return float(pot.v1(min(max(r, lo + eps), hi - eps)))

        def rhs(r, y, p):
            v = vfun(r)
            if r == 0.0:
                return p, betas * v * y / (c + 1.0)
            return p, betas * v * y - c / r * p

        for k in range(m):
            r = lo + k * h
            k1y, k1p = rhs(r, y, p)
            k2y, k2p = rhs(r + 0.5 * h, y + 0.5 * h * k1y, p + 0.5 * h * k1p)
            k3y, k3p = rhs(r + 0.5 * h, y + 0.5 * h * k2y, p + 0.5 * h * k2p)
            k4y, k4p = rhs(r + h, y + h * k3y, p + h * k3p)
            y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
            p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
            if keep:
                rs.append(lo + (k + 1) * h)
                ys.append(y.copy())
                ps.append(p.copy())
    if not keep:
        rs, ys, ps = [pieces[-1][1]], [y], [p]
    return ZeroEnergySolution(
        sector, betas, np.asarray(rs), np.stack(ys, axis=1), np.stack(ps, axis=1), pieces
    )


def asymptotic_constant(pot, sector: AngularSector, betas, step: float | None = None) -> np.ndarray:
    return shoot_zero_energy(pot, sector, betas, step).a


def _first_root(pot, sector, step, tol, beta_max):
    top = beta_max
    while True:
        grid = np.linspace(0.0, top, 65)[1:]
        a = asymptotic_constant(pot, sector, grid, step)
        neg = np.nonzero(a <= 0.0)[0]
        if neg.size:
            i = neg[0]
            lo, hi = (0.0 if i == 0 else grid[i - 1]), grid[i]
            break
        top *= 4.0
        if top > 1e6:
            raise BracketError(f"a(beta) keeps its sign on (0, {top / 4:g}]; no critical coupling")
    # multisection: bisection with 32 interior probes per pass
    while hi - lo > tol * max(1.0, hi):
        probes = np.linspace(lo, hi, 34)[1:-1]
        a = asymptotic_constant(pot, sector, probes, step)
        neg = np.nonzero(a <= 0.0)[0]
        if neg.size == 0:
            lo = probes[-1]
        else:
            i = neg[0]
            lo, hi = (lo if i == 0 else probes[i - 1]), probes[i]
    return 0.5 * (lo + hi)


def critical_coupling(
    pot,
    sector: AngularSector,
    step: float | None = None,
    tol: float = 1e-12,
    richardson: bool = True,
    beta_max: float | None = None,
) -> float:
    """Smallest beta > 0 with a(beta) = 0 for V1 = beta * v1.

    The root is bracketed to ``tol`` at steps h and h/2 and combined by
    Richardson extrapolation for the fourth-order scheme.
    """
    pot = _as_potential(pot)
    r = np.linspace(0.0, pot.support, 2001)
    vals = pot.v1(r)
    if np.any(vals > 0) or not np.any(vals < 0):
        raise ValueError("critical_coupling needs v1 <= 0 and v1 not identically 0")
    if beta_max is None:
        beta_max = 4.0 / (float(np.max(-vals)) * max(pot.support, 1.0) ** 2 / 4.0)
    b1 = _first_root(pot, sector, step, tol, beta_max)
    if not richardson:
        return b1
    if step is None:
        step = max(1e-3, pot.support / 1000.0)
    b2 = _first_root(pot, sector, step / 2, tol, beta_max)
    return (16.0 * b2 - b1) / 15.0


# ---------------------------------------------------------------------------
# lattice counterpart


def lattice_operator(pot: RadialPotential, sector: AngularSector, lam: float, h: float = 0.005, margin: float = 3.0):
    """Transparent-closure lattice with every potential jump on a node."""
    r_max = h * math.ceil((pot.support + margin) / h)
    n_points = int(round(r_max / h)) - 1
    for b in pot.breakpoints:
        if abs(b / h - round(b / h)) > 1e-9:
            raise ValueError(f"step h={h} does not put the jump at r={b} on a node")
    return discretize(pot, sector, lam, r_max=r_max, n_points=n_points, closure="transparent", min_points=50)


def lattice_critical_coupling(pot: RadialPotential, sector: AngularSector, guess: float, h: float = 0.005) -> float:
    """Coupling at which the lattice Jost function vanishes at z = 0 (zero-energy state on the lattice)."""
    from scipy.optimize import brentq

    def f(beta):
        return float(jost(lattice_operator(pot.with_beta(beta), sector, 0.0, h), 0.0)[0].real)

    lo, hi = guess * (1 - 1e-3), guess * (1 + 1e-3)
    while f(lo) * f(hi) > 0:
        lo, hi = lo * (1 - 1e-2), hi * (1 + 1e-2)
        if hi > 2 * guess:
            raise BracketError("lattice critical coupling not bracketed near the continuum value")
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-14)


def zero_energy_census(pot: RadialPotential, sector: AngularSector, step: float | None = None, critical_tol: float = 1e-7):
    """(negative eigenvalues, zero-energy kind) of the self-adjoint sector operator.

    Negative eigenvalues are counted as zeros of the zero-energy solution on
    (0, inf) (Sturm oscillation).  The kind is ``"eigenvalue"`` when a = 0 and
    nu > 1 (square-integrable decay r^{1/2 - nu}), ``"resonance"`` when a = 0
    and nu <= 1, otherwise ``"regular"``.
    """
    sol = shoot_zero_energy(pot, sector, [pot.beta], step, keep=True)
    y = sol.y[0]
    a = float(sol.a[0])
    nodes = int(np.count_nonzero(np.sign(y[1:]) * np.sign(y[:-1]) < 0))
    scale = float(np.max(np.abs(y)))
    if abs(a) <= critical_tol * scale:
        kind = "eigenvalue" if sector.nu > 1.0 else "resonance"
    else:
        kind = "regular"
        # y = a + b r^{-2 nu} outside; one more zero iff a and y(end) differ in sign
        if a * y[-1] < 0:
            nodes += 1
    return nodes, kind


# ---------------------------------------------------------------------------
# resonant state and its coefficients


@dataclass(frozen=True)
class ResonanceProfile:
    """Critical coupling, normalized zero-energy state and the derived coefficients."""

    beta0: float
    sector: AngularSector
    r: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    c1: complex
    c1p: complex
    v11: float
    N1: int = 0
    k: int = 1
    k0: int = 0

    @property
    def nu1(self) -> float:
        return self.sector.nu

    @property
    def m(self) -> int:
        return self.k0 + self.k

    def scaled(self, t: float) -> "ResonanceProfile":
        """Same data for phi -> t phi (the prediction must not change)."""
        return replace(self, phi=t * self.phi, c1=t * self.c1, c1p=t * self.c1p, v11=t * t * self.v11)

    def summary(self) -> dict:
        return {
            "beta0": self.beta0,
            "n": self.sector.n,
            "ell": self.sector.ell,
            "nu1": self.nu1,
            "c1": [self.c1.real, self.c1.imag],
            "c1p": [self.c1p.real, self.c1p.imag],
            "v11": self.v11,
            "N1": self.N1,
            "k": self.k,
            "k0": self.k0,
        }


def _piecewise_integral(r, integrand, pieces):
    """Simpson's rule on each smooth piece of the shooting grid.

    ``integrand(r_nodes, r_eval)`` receives the piece's nodes and the same
    nodes nudged inside the piece, so jumps are sampled from the correct side.
    """
    total = 0.0
    start = 0
    for lo, hi, m in pieces:
        stop = start + m
        nodes = r[start : stop + 1]
        eps = 1e-12 * (hi - lo)
        total += simpson(integrand(nodes, np.clip(nodes, lo + eps, hi - eps), slice(start, stop + 1)), x=nodes)
        start = stop
    return total


def resonant_state(pot: RadialPotential, sector: AngularSector, step: float | None = None):
    """Zero-energy solution at the potential's coupling in psi-form, normalized by <phi, -W1 phi> = 1.

    Returns (r, phi, pieces) on the shooting grid, which ends at the support
    of V1; beyond it phi = a + b r^{-2 nu} in y-form.
    """
    sol = shoot_zero_energy(pot, sector, [pot.beta], step, keep=True)
    r, psi = sol.r, sol.psi[0]
    n = sector.n
    norm = _piecewise_integral(
        r, lambda x, xe, sl: -pot.beta * pot.v1(xe) * psi[sl] ** 2 * x ** (n - 1), sol.pieces
    )
    if not norm > 0:
        raise NormalizationError(f"<phi, -W1 phi> = {norm:.3e} <= 0; is beta the critical coupling?")
    phi = psi / math.sqrt(norm)
    if np.max(phi) <= 0:
        phi = -phi
    return r, phi, sol.pieces


def resonance_coefficients(r, phi, pot: RadialPotential, sector: AngularSector, pieces=None):
    """(c1, c1', v11) for a real radial phi in the constant-harmonic sector.

    The constant spherical function integrates to 1 against itself, so the
    pairings with eta0 reduce to radial integrals with weight r^{n-1}.
    """
    n = sector.n
    if pieces is None:
        pieces = ((r[0], r[-1], r.size - 1),)
    parts = {
        "c1": lambda x, xe, sl: pot.beta * pot.v1(xe) * phi[sl] * x ** (n - 1),
        "c1p": lambda x, xe, sl: pot.v2(xe) * phi[sl] * x ** (n - 1),
        "v11": lambda x, xe, sl: pot.v2(xe) * phi[sl] ** 2 * x ** (n - 1),
    }
    vals = {k: _piecewise_integral(r, f, pieces) for k, f in parts.items()}
    # share of the outermost tenth of the grid; the grid of a compact profile
    # ends exactly at its support, where the check carries no information
    compact = all(p.kind in ("square_well", "zero") for p in (pot.v1, pot.v2))
    cut = int(0.9 * r.size)
    if not compact and cut < r.size - 2:
        tail_pieces = ((r[cut], r[-1], r.size - 1 - cut),)
        r_tail = r[cut:]
        for k, f in parts.items():
            tail = abs(_piecewise_integral(r_tail, lambda x, xe, sl, f=f: f(x, xe, slice(cut + sl.start, cut + sl.stop)), tail_pieces))
            if tail > 1e-6 * max(abs(vals[k]), 1e-300):
                warnings.warn(f"{k}: outer 10% of the grid contributes {tail:.2e}", QuadratureTailWarning, stacklevel=2)
    return complex(vals["c1"]), complex(vals["c1p"]), float(vals["v11"])


def resonance_profile(pot: RadialPotential, sector: AngularSector, beta0: float | None = None, step: float | None = None):
    """Critical coupling (unless given), resonant state and coefficients in one call."""
    if beta0 is None:
        beta0 = critical_coupling(pot, sector, step=step)
    at = pot.with_beta(beta0)
    r, phi, pieces = resonant_state(at, sector, step)
    c1, c1p, v11 = resonance_coefficients(r, phi, at, sector, pieces)
    nodes, kind = zero_energy_census(at, sector, step)
    k0 = 1 if kind == "eigenvalue" else 0
    return ResonanceProfile(
        beta0, sector, r, phi, c1, c1p, v11, N1=nodes + k0, k=1 if kind == "resonance" else 0, k0=k0
    )


# ---------------------------------------------------------------------------
# predicted eigenvalue


@dataclass(frozen=True)
class EmergentRoot:
    z0: complex
    rho: float
    theta: float
    r_param: float
    phi_arg: float
    c0: complex
    tau: float | None = None
    sigma: float | None = None


def leading_coefficient(nu1: float) -> complex:
    """c0 of the scalar equation: gamma_nu for nu in (0, 1), -1/8 for nu = 1."""
    return gamma_nu(nu1)


def _check_ass5(c1, c1p):
    prod = np.conj(c1) * c1p
    if abs(prod.imag) > 1e-8 * abs(c1 * c1p):
        raise AssumptionError(f"conj(c1) c1' = {prod} is not real; the sign condition is undefined")
    if not prod.real < 0:
        raise AssumptionError(f"conj(c1) c1' = {prod.real:.3e} is not negative")
    return complex(prod)


def p_residual(z, lam, c1, c1p, v11, nu1) -> float:
    """|i lambda v11 + c0 z_nu(z) (|c1|^2 - i lambda conj(c1) c1')| / (lambda v11)."""
    c0 = leading_coefficient(nu1)
    x = abs(c1) ** 2 - 1j * lam * np.conj(c1) * c1p
    return float(abs(1j * lam * v11 + c0 * z_nu(z, nu1) * x) / (lam * v11))


def predict_eigenvalue(prof: ResonanceProfile, lam: float, nu1: float | None = None) -> EmergentRoot:
    """Leading-order eigenvalue emitted by the threshold resonance."""
    nu1 = prof.nu1 if nu1 is None else nu1
    if not 0.5 <= nu1 <= 1.0:
        raise ValueError(f"nu1={nu1} outside [1/2, 1]")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    prod = _check_ass5(prof.c1, prof.c1p)
    c0 = leading_coefficient(nu1)
    c1sq = abs(prof.c1) ** 2
    r_param = lam * prof.v11 / (abs(c0) * abs(c1sq - 1j * lam * prod))
    phi_arg = float(np.angle(-lam * prod + 1j * c1sq))
    if not 0.0 < phi_arg < 0.5 * np.pi:
        raise AssumptionError(f"phi_arg={phi_arg} outside (0, pi/2)")
    if nu1 < 1.0:
        rho = r_param ** (1.0 / nu1)
        theta = np.pi + phi_arg / nu1
        return EmergentRoot(complex(rho * np.exp(1j * theta)), rho, theta, r_param, phi_arg, c0)
    tau, sigma, z0 = solve_p2(r_param, phi_arg)
    return EmergentRoot(z0, abs(z0), float(np.angle(z0) % (2 * np.pi)), r_param, phi_arg, c0, tau, sigma)


def solve_p2(r_param: float, phi_arg: float, tol: float = 1e-13, max_iter: int = 100):
    """Solve tau exp(-tau cos sigma) = r, -sigma + tau sin sigma = phi + pi by damped Newton.

    Then log z = tau exp(-i(pi + sigma)), so rho = exp(-tau cos sigma) and
    theta = tau sin sigma = pi + phi + sigma, and z log z = r exp(i phi).
    """
    if not r_param > 0:
        raise ValueError("r_param must be positive")
    if not 0.0 < phi_arg < 0.5 * np.pi:
        raise ValueError("phi_arg must lie in (0, pi/2)")
    L = math.log(1.0 / r_param)
    if L <= 1.0:
        raise ValueError(f"r_param={r_param} too large for the small-r solution branch")
    tau = L + math.log(L)
    sigma = (phi_arg + math.pi) / tau
    target = phi_arg + math.pi
    lr = math.log(r_param)

    def F(t, s):
        # first equation in log form keeps the scales comparable
        return np.array([math.log(t) - t * math.cos(s) - lr, -s + t * math.sin(s) - target])

    trace = [(tau, sigma)]
    f = F(tau, sigma)
    for _ in range(max_iter):
        jac = np.array(
            [[1.0 / tau - math.cos(sigma), tau * math.sin(sigma)], [math.sin(sigma), -1.0 + tau * math.cos(sigma)]]
        )
        delta = np.linalg.solve(jac, -f)
        step = 1.0
        while step > 1e-6:
            t_new, s_new = tau + step * delta[0], sigma + step * delta[1]
            if t_new > 0:
                f_new = F(t_new, s_new)
                if np.linalg.norm(f_new) < np.linalg.norm(f) or np.linalg.norm(f) < 1e-14:
                    break
            step *= 0.5
        tau, sigma, f = t_new, s_new, f_new
        trace.append((tau, sigma))
        if np.max(np.abs(step * delta)) <= tol * max(1.0, abs(tau)):
            break
    else:
        raise ConvergenceError("solve_p2: Newton did not converge", trace)
    res1 = abs(tau * math.exp(-tau * math.cos(sigma)) - r_param)
    res2 = abs(-sigma + tau * math.sin(sigma) - target)
    if res1 > 1e-12 * max(1.0, r_param) * 10 or res2 > 1e-12 * 10:
        raise ConvergenceError(f"solve_p2: residuals {res1:.1e}, {res2:.1e}", trace)
    rho = math.exp(-tau * math.cos(sigma))
    theta = math.pi + phi_arg + sigma
    return tau, sigma, complex(rho * np.exp(1j * theta))


# ---------------------------------------------------------------------------
# trajectory


@dataclass(frozen=True)
class TrajectoryPoint:
    lam: float
    z_num: complex
    z_pred: complex
    rel_err: float
    residual_p: float
    converged: bool = True

    def row(self) -> list:
        return [
            self.lam,
            self.z_num.real,
            self.z_num.imag,
            self.z_pred.real,
            self.z_pred.imag,
            self.rel_err,
            self.residual_p,
        ]


def track_trajectory(
    pot: RadialPotential,
    sector: AngularSector,
    lambdas,
    prof: ResonanceProfile,
    h: float = 0.005,
    delta: float = 0.5,
):
    """Numerical eigenvalue near threshold for each lambda, seeded by the prediction.

    V1 is taken at the profile's critical coupling.  Each prediction is
    refined by Newton on the lattice Jost function; the previous numerical
    root is used as a second seed.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) <= 0) or lambdas[0] < 1e-3:
        raise ValueError("lambda grid must be increasing and start at >= 1e-3")
    at = pot.with_beta(prof.beta0)
    region = HalfDisk(0.0, delta)
    out = []
    prev = None
    for lam in lambdas:
        root = predict_eigenvalue(prof, float(lam))
        op = lattice_operator(at, sector, float(lam), h)
        best = None
        for seed in ([root.z0] if prev is None else [root.z0, prev]):
            z, ok = newton_root(op, seed, region=region)
            if ok and region.contains(z):
                best = z
                break
        if best is None:
            raise LostTrajectoryError(f"lambda={lam}: refinement left {region.describe()}")
        prev = best
        rel = abs(best - root.z0) / abs(root.z0)
        res = p_residual(root.z0, float(lam), prof.c1, prof.c1p, prof.v11, prof.nu1)
        out.append(TrajectoryPoint(float(lam), complex(best), root.z0, float(rel), res))
    return out
