import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from thresholdlab.model_resolvent import AngularSector
from thresholdlab.radial_operator import (
    Disk,
    GridError,
    HalfDisk,
    NearSingularError,
    RadialPotential,
    birman_schwinger_norm,
    cluster,
    complex_spectrum,
    confirm_point_spectrum,
    count_zeros,
    discretize,
    exponential,
    inverse_iteration,
    jost,
    locate_roots,
    newton_root,
    square_well,
    tabulated,
    transparent_spectrum,
    zero_profile,
)

S_WAVE = AngularSector(3, 0)


def well(depth, v2=0.0):
    return RadialPotential(square_well(-1.0), square_well(v2) if v2 else zero_profile(), beta=depth)


def square_well_bound_state(depth):
    """Root of sqrt(V0 + E) cot sqrt(V0 + E) = -sqrt(-E) for the unit-radius well."""
    f = lambda e: math.sqrt(depth + e) / math.tan(math.sqrt(depth + e)) + math.sqrt(-e)
    return brentq(f, -depth + 1e-9, -1e-9, xtol=1e-15)


# -- profiles and potentials --------------------------------------------------


def test_profile_values_and_jump_average():
    w = square_well(2.0, radius=1.5)
    np.testing.assert_array_equal(w(np.array([0.5, 1.49, 1.6])), [2.0, 2.0, 0.0])
    assert w.sample(np.array([1.5]))[0] == pytest.approx(1.0)
    assert exponential(3.0, 2.0)(0.5) == pytest.approx(3.0 * math.exp(-1.0))
    t = tabulated([0.0, 1.0, 2.0], [1.0, 3.0, 1.0])
    assert t(1.5) == pytest.approx(2.0) and t(5.0) == 0.0


@pytest.mark.parametrize("kind, kwargs", [("square_well", {"radius": 0.0}), ("exponential", {"rate": -1.0}), ("nope", {})])
def test_profile_rejects_bad_parameters(kind, kwargs):
    from thresholdlab.radial_operator import Profile

    with pytest.raises(ValueError):
        Profile(kind, 1.0, **kwargs)


def test_potential_flags():
    assert well(1.0, 1.0).is_dissipative()
    assert not well(1.0).is_dissipative()
    assert not RadialPotential(square_well(-1.0), square_well(-1.0)).is_dissipative()
    assert well(1.0, 1.0).decay_ok()
    slow = RadialPotential(tabulated(np.linspace(0, 45, 200), 1.0 / (1 + np.linspace(0, 45, 200))), rho1=4.0)
    assert not slow.decay_ok()
    assert not RadialPotential(square_well(-1.0), rho1p=2.5).counting_exponents_ok()


# -- discretization -------------------------------------------------------------


def test_free_dirichlet_modes():
    op = discretize(RadialPotential(zero_profile()), S_WAVE, 0.0, r_max=20.0, n_points=399)
    ev = np.sort(complex_spectrum(op).real)[:5]
    k = np.arange(1, 6)
    exact = (k * math.pi / 20.0) ** 2
    # second-order scheme: the discrete modes sit below the continuum by k^4 pi^4 h^2 / (12 R^4)
    assert np.all(np.abs(ev - exact) <= exact**2 * op.h**2 / 12 * 1.01 + 1e-12)
    np.testing.assert_allclose(ev, 4 / op.h**2 * np.sin(k * math.pi * op.h / 40.0) ** 2, rtol=1e-10)


def test_matrix_structure():
    op = discretize(well(4.0, 1.0), AngularSector(3, 1), 0.1, r_max=10.0, n_points=299)
    a = op.dense()
    np.testing.assert_array_equal(a, a.T)
    assert np.abs(a.imag).max() > 0
    real = discretize(well(4.0, 1.0), AngularSector(3, 1), 0.0, r_max=10.0, n_points=299).dense()
    assert np.abs(real.imag).max() == 0.0
    np.testing.assert_allclose(real, real.conj().T)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_points": 100},
        {"r_max": 1.2, "n_points": 300},
        {"r_max": 40.0, "n_points": 210, "pot": well(400.0)},
    ],
)
def test_discretize_guards(kwargs):
    pot = kwargs.pop("pot", well(4.0))
    with pytest.raises(GridError):
        discretize(pot, S_WAVE, 0.0, **{"r_max": 40.0, **kwargs})


def test_square_well_bound_state_richardson():
    exact = square_well_bound_state(4.0)
    assert exact == pytest.approx(-0.40710148, abs=1e-8)
    vals = []
    for n in (399, 799):  # h = 0.05, 0.025: the jump sits on a node
        op = discretize(well(4.0), S_WAVE, 0.0, r_max=20.0, n_points=n)
        neg = [z.real for z in complex_spectrum(op) if z.real < 0]
        assert len(neg) == 1
        vals.append(neg[0])
    rich = (4 * vals[1] - vals[0]) / 3
    assert abs(rich - exact) <= 1e-6
    assert abs(vals[1] - exact) < abs(vals[0] - exact) / 3.5  # second order


@settings(max_examples=15, deadline=None)
@given(
    st.lists(st.floats(0.0, 3.0), min_size=4, max_size=8),
    st.floats(0.01, 1.0),
    st.sampled_from([0, 1, 2]),
)
def test_dissipative_half_plane(v2_values, lam, ell):
    grid = np.linspace(0.0, 3.0, len(v2_values))
    pot = RadialPotential(square_well(-1.0), tabulated(grid, v2_values), beta=3.0)
    op = discretize(pot, AngularSector(3, ell), lam, r_max=12.0, n_points=239)
    z = complex_spectrum(op)
    assert np.all(z.imag <= 1e-9 * np.abs(z).max())


# -- dense eigenvalues ------------------------------------------------------------


def test_complex_spectrum_diagonal_and_jordan():
    d = np.array([1.0, -2.0 + 1j, 3.5j])
    np.testing.assert_allclose(np.sort_complex(complex_spectrum(np.diag(d))), np.sort_complex(d))
    w = complex_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]), check=False)
    groups = cluster(w, 1e-6)
    assert len(groups) == 1 and groups[0][1] == 2 and abs(groups[0][0]) < 1e-12


def _charpoly_roots_tridiagonal(diag, off, dps=80):
    """Roots of det(T - z) from the three-term recurrence, in extended precision."""
    with mpmath.workdps(dps):
        p_prev = [mpmath.mpc(1)]
        p = [mpmath.mpc(diag[0]), mpmath.mpc(-1)]  # coefficients in ascending powers
        for i in range(1, len(diag)):
            a, b2 = mpmath.mpc(diag[i]), mpmath.mpc(off[i - 1]) ** 2
            nxt = [mpmath.mpc(0)] * (len(p) + 1)
            for k, c in enumerate(p):
                nxt[k] += a * c
                nxt[k + 1] -= c
            for k, c in enumerate(p_prev):
                nxt[k] -= b2 * c
            p_prev, p = p, nxt
        roots = mpmath.polyroots(p[::-1], maxsteps=400, extraprec=400)
        return np.array([complex(r) for r in roots])


def test_complex_spectrum_against_companion_oracle():
    rng = np.random.default_rng(7)
    n = 50
    diag = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    off = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
    a = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    ours = complex_spectrum(a)
    ref = _charpoly_roots_tridiagonal(diag, off)
    for z in ref:
        assert np.min(np.abs(ours - z)) <= 1e-8 * max(1.0, abs(z))


def test_complex_spectrum_size_guard():
    with pytest.raises(ValueError):
        complex_spectrum(np.zeros((3, 4)))


# -- confirmation protocol ------------------------------------------------------------


@pytest.mark.parametrize(
    "pot, lam, expected",
    [(RadialPotential(zero_profile()), 0.0, 0), (well(1.0, 1.0), 0.1, 0), (well(4.0), 0.0, 1), (well(4.0, 4.0), 0.1, 1)],
    ids=["free", "subcritical", "supercritical", "supercritical-damped"],
)
def test_confirmation_counts(pot, lam, expected):
    op = discretize(pot, S_WAVE, lam, r_max=20.0, n_points=399)
    with warnings.catch_warnings():
        warnings.simplefilter("error")  # no ambiguous candidates expected
        rep = confirm_point_spectrum(pot, S_WAVE, lam, complex_spectrum(op), r_max=20.0, n_points=399)
    assert rep.count == expected
    for e in rep.confirmed:
        assert e.z.imag <= 0 and not (e.z.real > 0 and e.z.imag == 0)
        if lam == 0:
            assert abs(e.z.imag) <= 1e-10
            assert e.z.real == pytest.approx(square_well_bound_state(4.0), abs=1e-6)


def test_inverse_iteration_converges_to_nearest():
    op = discretize(well(4.0, 4.0), S_WAVE, 0.1, r_max=20.0, n_points=399)
    ref = complex_spectrum(op)
    z, v = inverse_iteration(op, -0.3 - 0.1j)
    assert np.min(np.abs(ref - z)) < 1e-10
    a = op.matrix()
    assert np.linalg.norm(a @ v - z * v) <= 1e-8 * np.linalg.norm(v)


# -- transparent lattice: Jost function, winding, Newton --------------------------------


def lattice(pot, lam, sector=S_WAVE, r_max=4.0, n=399):
    return discretize(pot, sector, lam, r_max=r_max, n_points=n, closure="transparent")


def test_jost_zero_is_eigenvalue_of_closed_matrix():
    op = lattice(well(4.0, 4.0), 0.1)
    z, ok = newton_root(op, -0.4 - 0.05j)
    assert ok
    a = op.dense(z)
    smin = np.linalg.svd(a - z * np.eye(op.size), compute_uv=False)[-1]
    assert smin <= 1e-9 * np.linalg.norm(a, 2)


@pytest.mark.parametrize("sector", [S_WAVE, AngularSector(3, 1), AngularSector(4, 0)], ids=["3-0", "3-1", "4-0"])
def test_jost_derivative(sector):
    op = lattice(well(6.0, 1.0), 0.2, sector)
    z = -0.7 - 0.3j
    J, dJ = jost(op, z, derivative=True)
    eps = 1e-6
    fd = (jost(op, z + eps) - jost(op, z - eps)) / (2 * eps)
    assert dJ[0] == pytest.approx(fd[0], rel=1e-6)


def test_transparent_spectrum_matches_newton_roots():
    op = lattice(well(12.0, 2.0), 0.15)
    dense = [z for z in transparent_spectrum(op) if abs(z) < 10]
    roots = locate_roots(op, HalfDisk(0.0, 10.0))
    assert len(dense) == len(roots) >= 1
    for z in dense:
        assert min(abs(z - w) for w in roots) <= 1e-8 * max(1.0, abs(z))


def test_transparent_closure_exact_for_bound_state():
    # nu = 1/2 exterior ratio is exact: only the interior h^2 error remains
    vals = []
    for n in (399, 799):
        op = lattice(well(4.0), 0.0, n=n)
        (z,) = [x for x in transparent_spectrum(op) if abs(x) < 10 and x.real < -1e-3]
        vals.append(z.real)
    rich = (4 * vals[1] - vals[0]) / 3
    assert abs(rich - square_well_bound_state(4.0)) < 1e-7


def test_count_zeros_polynomial():
    roots = [-0.3 - 0.2j, 0.5 - 0.1j, -0.2 + 0.4j, 2.0 - 0.1j]
    fn = lambda z: np.prod([z - r for r in roots], axis=0)
    n, diag = count_zeros(fn, HalfDisk(0.0, 1.0))
    assert n == 2
    assert count_zeros(fn, Disk(0.0, 1.0))[0] == 3
    assert count_zeros(fn, HalfDisk(2.0, 0.3))[0] == 1


@given(st.floats(-3, 3), st.floats(0.01, 3))
def test_half_disk_boundary_stays_below_axis(center, radius):
    t = np.linspace(0, 2, 101)
    b = HalfDisk(center, radius).boundary(t)
    assert np.all(b.imag <= 0.0)
    assert b[0] == pytest.approx(b[-1])


def test_count_is_multiplicity_of_double_root():
    fn = lambda z: (z + 0.3 + 0.2j) ** 2 * (z - 3.0)
    assert count_zeros(fn, HalfDisk(0.0, 1.0))[0] == 2


# -- Birman-Schwinger -------------------------------------------------------------------


def _dense_bs(pot, lam, z, r_max=8.0, n=799):
    op = discretize(pot, S_WAVE, 0.0, r_max=r_max, n_points=n, closure="transparent")
    a = op.dense(z) - z * np.eye(op.size)
    s = np.sqrt(np.abs(pot.V2(op.r)))
    m = s[:, None] * np.linalg.inv(a) * s[None, :]
    return lam * np.linalg.svd(m, compute_uv=False)[0]


def test_birman_schwinger_dense_oracle_and_bound():
    pot = well(1.0, 1.0)
    for z in (-0.5 - 0.15j, -0.3 - 0.01j, 1.0 - 0.1j):
        val = birman_schwinger_norm(pot, S_WAVE, 0.2, z)
        assert val == pytest.approx(_dense_bs(pot, 0.2, z), rel=1e-9)
        assert val < 1.0


@given(st.floats(0.0, 5.0), st.floats(-1.0, 1.5), st.floats(-0.5, -0.01))
@settings(max_examples=20, deadline=None)
def test_birman_schwinger_linear_in_lambda(lam, x, y):
    pot = well(1.0, 1.0)
    z = complex(x, y)
    base = birman_schwinger_norm(pot, S_WAVE, 1.0, z)
    assert birman_schwinger_norm(pot, S_WAVE, lam, z) == pytest.approx(lam * base, rel=1e-12, abs=1e-300)


def test_birman_schwinger_guards():
    pot = well(4.0, 1.0)
    assert birman_schwinger_norm(pot, S_WAVE, 0.0, -1.0) == 0.0
    with pytest.raises(ValueError):
        birman_schwinger_norm(pot, S_WAVE, 0.1, 0.5)
    op = discretize(pot, S_WAVE, 0.0, r_max=8.0, n_points=799, closure="transparent")
    (e,) = [z for z in transparent_spectrum(op) if z.real < -1e-3 and abs(z) < 10]
    with pytest.raises(NearSingularError):
        birman_schwinger_norm(pot, S_WAVE, 0.1, e.real - 1e-10j)
