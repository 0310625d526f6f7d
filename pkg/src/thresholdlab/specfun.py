"""Real-argument special functions used across the package.

Gamma is a Lanczos approximation, exact at integers and half-integers.  J uses
its power series below ``x = 14`` and the Hankel asymptotic expansion above it.
I uses its power series up to ``x = 2``; beyond that, and for K everywhere,
Temme's series (small x) and Steed's continued fraction (the classic ``bessik``
scheme) are used.  Nothing here depends on scipy; the test-suite compares
against it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "DomainError",
    "PolyNuK",
    "gamma",
    "bessel",
    "bessel_j",
    "bessel_i",
    "bessel_k",
    "beta_moment",
    "p_poly",
    "p_poly_coefficients",
]


class DomainError(ValueError):
    """Argument outside the domain of a numerical routine."""


_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_EULER_GAMMA = 0.57721566490153286061


def gamma(x: float) -> float:
    """Gamma function for ``0 < x <= 170``."""
    x = float(x)
    if not (x > 0.0) or x > 170.0:
        raise DomainError(f"gamma: x={x!r} outside (0, 170]")
    # closed forms: exact factorials, and sqrt(pi) times a rational within 1 ulp
    if x.is_integer():
        return float(math.factorial(int(x) - 1))
    if (x - 0.5).is_integer():
        n = int(x - 0.5)
        return float(Fraction(math.factorial(2 * n), 4**n * math.factorial(n))) * math.sqrt(math.pi)
    if x < 0.5:
        return gamma(x + 1.0) / x
    if x > 12.0:
        # downward recurrence: x - j is exact in binary, so the product adds only
        # O(sqrt(j)) ulp, unlike t**(x+1/2) whose error grows linearly in x
        k = math.ceil(x - 12.0)
        prod = 1.0
        for j in range(1, k + 1):
            prod *= x - j
        return prod * gamma(x - k)
    y = x - 1.0
    a = _LANCZOS_P[0]
    for i, p in enumerate(_LANCZOS_P[1:], start=1):
        a += p / (y + i)
    t = y + _LANCZOS_G + 0.5
    # split the power so t**(y+0.5) cannot overflow before exp(-t) is applied
    half = t ** ((y + 0.5) / 2.0)
    return _SQRT_2PI * half * (half * math.exp(-t)) * a


# ---------------------------------------------------------------------------
# Bessel J


def _j_series_wide(nu: float, x: float) -> float:
    # terms peak near e^x / (2 pi x) before cancelling, so sum them with 40 digits
    with localcontext() as ctx:
        ctx.prec = 40
        q = -(Decimal(x) / 2) ** 2
        d_nu = Decimal(nu)
        term = total = Decimal(1)
        k = 0
        while True:
            k += 1
            term *= q / (k * (k + d_nu))
            total += term
            if k > x and abs(term) < Decimal("1e-30") * abs(total):
                break
    return (0.5 * x) ** nu / gamma(nu + 1.0) * float(total)


def _j_series(nu: float, x: float) -> float:
    if x > 5.0:
        return _j_series_wide(nu, x)
    h = 0.5 * x
    term = h**nu / gamma(nu + 1.0)
    total = term
    q = -h * h
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if abs(term) < 1e-17 * abs(total) and k > h:
            return total
        if k > 500:
            return total


def _hankel_pq(nu: float, x: float) -> tuple[float, float]:
    mu = 4.0 * nu * nu
    p, q = 1.0, 0.0
    term = 1.0
    prev = math.inf
    k = 0
    while k < 200:
        k += 1
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) > prev or term == 0.0:
            break
        prev = abs(term)
        # a_k / x^k enters P with sign (-1)^(k/2) for even k, Q with (-1)^((k-1)/2) for odd k
        if k % 2 == 0:
            p += term * (-1) ** (k // 2)
        else:
            q += term * (-1) ** ((k - 1) // 2)
        if abs(term) < 1e-17:
            break
    return p, q


def bessel_j(nu: float, x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"bessel J: x={x!r} must be positive")
    if nu < 0.0:
        raise DomainError(f"bessel J: order {nu!r} must be >= 0")
    if x < 14.0:
        return _j_series(nu, x)
    p, q = _hankel_pq(nu, x)
    w = x - 0.5 * nu * math.pi - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(w) - q * math.sin(w))


# ---------------------------------------------------------------------------
# Bessel I and K


@lru_cache(maxsize=None)
def _zeta(k: int) -> float:
    # Euler-Maclaurin with cutoff 40; remainder below 1e-17 for k >= 2
    n = 40
    s = math.fsum(m ** (-k) for m in range(1, n))
    s += n ** (1 - k) / (k - 1) + 0.5 * n ** (-k)
    s += k * n ** (-k - 1) / 12.0
    s -= k * (k + 1) * (k + 2) * n ** (-k - 3) / 720.0
    s += k * (k + 1) * (k + 2) * (k + 3) * (k + 4) * n ** (-k - 5) / 30240.0
    return s


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """gam1, gam2 and 1/Gamma(1 +- mu) for |mu| <= 1/2 without cancellation.

    Uses ln Gamma(1+x) = -gamma_E x + sum_{k>=2} (-1)^k zeta(k) x^k / k, split
    into even and odd parts.
    """
    even = 0.0
    odd_over_mu = -_EULER_GAMMA
    m2 = mu * mu
    pw = m2  # mu^k for the current k (k=2 first)
    for k in range(2, 80):
        if k % 2 == 0:
            even += _zeta(k) * pw / k
        else:
            odd_over_mu -= _zeta(k) * (pw / mu if mu != 0.0 else 0.0) / k
        if abs(pw) < 1e-18:
            break
        pw *= mu
    odd = odd_over_mu * mu
    e = math.exp(-even)
    shc = math.sinh(odd) / odd if odd != 0.0 else 1.0
    gam1 = e * odd_over_mu * shc  # (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
    gam2 = e * math.cosh(odd)
    gampl = e * math.exp(-odd)  # 1/Gamma(1+mu)
    gammi = e * math.exp(odd)  # 1/Gamma(1-mu)
    return gam1, gam2, gampl, gammi


def _bessik(nu: float, x: float) -> tuple[float, float]:
    eps = 1e-16
    fpmin = 1e-300
    nl = int(nu + 0.5)
    xmu = nu - nl
    xmu2 = xmu * xmu
    xi = 1.0 / x
    xi2 = 2.0 * xi
    # CF1: I'_nu / I_nu
    h = max(nu * xi, fpmin)
    b = xi2 * nu
    d = 0.0
    c = h
    for _ in range(100000):
        b += xi2
        d = 1.0 / (b + d)
        c = b + 1.0 / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    else:
        raise ArithmeticError("bessik: CF1 did not converge")
    ril = fpmin
    ripl = h * ril
    ril1 = ril
    fact = nu * xi
    for _ in range(nl, 0, -1):
        ritemp = fact * ril + ripl
        fact -= xi
        ripl = fact * ritemp + ril
        ril = ritemp
    f = ripl / ril
    if x < 2.0:
        x2 = 0.5 * x
        pimu = math.pi * xmu
        fact = 1.0 if abs(pimu) < eps else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = xmu * d
        fact2 = 1.0 if abs(e) < eps else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(xmu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        sum1 = p
        i = 0
        while True:
            i += 1
            ff = (i * ff + p + q) / (i * i - xmu2)
            c *= d / i
            p /= i - xmu
            q /= i + xmu
            delta = c * ff
            total += delta
            sum1 += c * (p - i * ff)
            if abs(delta) < abs(total) * eps:
                break
            if i > 1000:
                raise ArithmeticError("bessik: Temme series did not converge")
        rkmu = total
        rk1 = sum1 * xi2
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = delh = d
        q1, q2 = 0.0, 1.0
        a1 = 0.25 - xmu2
        q = c = a1
        a = -a1
        s = 1.0 + q * delh
        i = 0
        while True:
            i += 1
            a -= 2 * i
            c = -a * c / (i + 1.0)
            qnew = (q1 - b * q2) / a
            q1, q2 = q2, qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < eps:
                break
            if i > 100000:
                raise ArithmeticError("bessik: CF2 did not converge")
        h = a1 * h
        rkmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi
    rkmup = xmu * xi * rkmu - rk1
    rimu = xi / (f * rkmu - rkmup)
    ri = rimu * ril1 / ril
    for i in range(1, nl + 1):
        rktemp = (xmu + i) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = rktemp
    return ri, rkmu


def _i_series(nu: float, x: float) -> float:
    # all terms positive, so no cancellation
    h = 0.5 * x
    term = h**nu / gamma(nu + 1.0)
    total = term
    q = h * h
    k = 0
    while term > 1e-17 * total:
        k += 1
        term *= q / (k * (k + nu))
        total += term
    return total


def bessel_i(nu: float, x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"bessel I: x={x!r} must be positive")
    if nu < 0.0:
        raise DomainError(f"bessel I: order {nu!r} must be >= 0")
    # the Wronskian route in bessik cancels badly for small x, where I ~ x^nu
    if x <= 2.0:
        return _i_series(nu, x)
    return _bessik(nu, x)[0]


def bessel_k(nu: float, x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"bessel K: x={x!r} must be positive")
    if nu < 0.0:
        raise DomainError(f"bessel K: order {nu!r} must be >= 0")
    return _bessik(nu, x)[1]


_KINDS = {"J": bessel_j, "I": bessel_i, "K": bessel_k}


def bessel(kind: str, nu: float, x: float) -> float:
    """Bessel function J_nu, I_nu or K_nu of a positive real argument."""
    try:
        fn = _KINDS[kind.upper()]
    except (KeyError, AttributeError):
        raise DomainError(f"unknown Bessel kind {kind!r}; expected J, I or K") from None
    return fn(float(nu), float(x))


# ---------------------------------------------------------------------------
# P_{nu,k}


def beta_moment(nu: float, i: int) -> float:
    """int_{-1}^{1} theta^i (1 - theta^2)^(nu - 1/2) d theta."""
    if i % 2:
        return 0.0
    m = i // 2
    return gamma(m + 0.5) * gamma(nu + 0.5) / gamma(m + nu + 1.0)


@dataclass(frozen=True)
class PolyNuK:
    """P_{nu,k} as a polynomial in rho; ``coefficients[m]`` multiplies rho**m."""

    nu: float
    k: int
    coefficients: tuple[float, ...]

    def __call__(self, rho):
        return np.polynomial.polynomial.polyval(rho, self.coefficients)


def p_poly_coefficients(nu: float, k: int) -> PolyNuK:
    if nu < 0.0 or k < 0:
        raise DomainError(f"p_poly: need nu >= 0 and k >= 0, got nu={nu}, k={k}")
    coeffs = [0.0] * (k + 1)
    # (rho + theta/2)^k = sum_i C(k,i) rho^(k-i) (theta/2)^i
    for i in range(0, k + 1, 2):
        coeffs[k - i] = math.comb(k, i) * 0.5**i * beta_moment(nu, i)
    return PolyNuK(float(nu), int(k), tuple(coeffs))


def p_poly(nu: float, k: int, rho):
    """P_{nu,k}(rho) = int_{-1}^{1} (rho + theta/2)^k (1 - theta^2)^(nu - 1/2) d theta."""
    return p_poly_coefficients(nu, k)(rho)
