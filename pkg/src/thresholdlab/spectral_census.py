"""Eigenvalue counts of H(lambda) = H1 - i lambda V2 against the threshold counting laws.

N(lambda) is the number of eigenvalues of H(lambda) (lambda > 0) with
multiplicity; N1 is the number for H1 including zero-energy eigenvalues, and
k = 1 when zero is a resonance of H1.  The laws checked are

* zero regular for H1:        N(lambda) = N1
* zero eigenvalue of H1:      N(lambda) = N1
* zero resonance of H1:       N(lambda) = N1 + 1

Counting for lambda > 0 uses the winding number of the lattice Jost function
(transparent closure) over the half-disk |z| < 10, Im z < 0, at several grid
refinements; roots are also located by Newton and must agree in number with
the winding.  N1 comes from Sturm oscillation of the zero-energy solution plus
the asymptotic-constant test for a zero-energy state.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .model_resolvent import AngularSector
from .radial_operator import (
    Disk,
    HalfDisk,
    RadialPotential,
    birman_schwinger_norm,
    complex_spectrum,
    confirm_point_spectrum,
    count_zeros,
    discretize,
    jost,
    locate_roots,
    square_well,
    transparent_spectrum,
)
from .resonance_lab import (
    AssumptionError,
    critical_coupling,
    lattice_operator,
    predict_eigenvalue,
    resonance_profile,
    zero_energy_census,
)

__all__ = [
    "Expected",
    "Scenario",
    "SectorCount",
    "CountResult",
    "CensusReport",
    "REGULAR",
    "ZERO_EIGENVALUE",
    "RESONANCE",
    "hypothesis_checklist",
    "count_eigenvalues",
    "threshold_counts",
    "verify_counting_law",
    "no_accumulation_scan",
    "birman_schwinger_guard",
    "dense_cross_check",
    "builtin_scenarios",
    "BUILTIN_NAMES",
    "refinement_levels",
]

REGULAR = "regular_threshold"
ZERO_EIGENVALUE = "threshold_eigenvalue"
RESONANCE = "threshold_resonance"

GLOBAL_REGION = HalfDisk(0.0, 10.0)
BUILTIN_NAMES = ("subcritical", "supercritical", "critical_resonance", "l1_zero_eigenvalue")


@dataclass(frozen=True)
class Expected:
    N1: int
    k: int = 0
    k0: int = 0


@dataclass(frozen=True)
class Scenario:
    """One counting experiment.

    ``weighted`` counts each radial eigenvalue with the dimension of its
    harmonic space (full-space count); otherwise radial eigenvalues count once.
    """

    name: str
    pot: RadialPotential
    sectors: tuple
    lambda_grid: tuple
    expected: Expected
    law: str = REGULAR
    delta: float = 0.5
    regions: tuple = (HalfDisk(0.0, 0.5), HalfDisk(1.0, 0.2))
    weighted: bool = True
    h: float = 0.01
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "law": self.law,
            "potential": self.pot.to_dict(),
            "sectors": [{"n": s.n, "ell": s.ell} for s in self.sectors],
            "lambda_grid": list(self.lambda_grid),
            "expected": asdict(self.expected),
            "delta": self.delta,
            "weighted": self.weighted,
            "h": self.h,
        }


# ---------------------------------------------------------------------------
# hypotheses


def _nu_set_ok(sectors: Sequence[AngularSector]) -> bool:
    """Exactly one channel order in (0, 1] over all harmonics of the dimension."""
    n = sectors[0].n
    orders = [AngularSector(n, ell).nu for ell in range(0, 6)]
    return sum(1 for nu in orders if 0.0 < nu <= 1.0) == 1


def hypothesis_checklist(sc: Scenario, profile=None) -> dict:
    """Boolean checklist evaluated before a run.

    decay: declared decay verified on a grid, with the counting exponents > 3;
    local: bounded profiles are locally integrable; inverse_square: no
    inverse-square tail (q = 0), so the lowest channel lies above
    -(n-2)^2/4; single_order: exactly one channel order in (0, 1];
    dissipative: V2 >= 0 and V2 != 0; sign_condition: nu1 in [1/2, 1] and
    conj(c1) c1' real and negative (only evaluated for the resonance law).
    """
    pot = sc.pot
    checks = {
        "decay": pot.decay_ok() and pot.counting_exponents_ok(),
        "local": all(np.all(np.isfinite(f(np.linspace(1e-3, 20, 2001)))) for f in (pot.V1, pot.V2)),
        "inverse_square": all(s.q == 0.0 for s in sc.sectors),
        "single_order": _nu_set_ok(sc.sectors),
        "dissipative": pot.is_dissipative(),
    }
    if sc.law == RESONANCE:
        sector = sc.sectors[0]
        prof = profile or resonance_profile(pot, sector, beta0=pot.beta)
        ok = 0.5 <= prof.nu1 <= 1.0
        try:
            predict_eigenvalue(prof, min(sc.lambda_grid))
        except AssumptionError:
            ok = False
        checks["sign_condition"] = ok
    return checks


# ---------------------------------------------------------------------------
# counting


def refinement_levels(h: float, refine: int = 2, margin: float = 3.0):
    """(h, margin) pairs: base, h/2, then doubled outer radius."""
    levels = [(h, margin)]
    if refine >= 1:
        levels.append((h / 2.0, margin))
    if refine >= 2:
        levels.append((h, 2.0 * margin + 1.0))
    return levels


@dataclass
class SectorCount:
    ell: int
    count: int | None
    roots: list
    winding: float
    weight: int


@dataclass
class CountResult:
    total: int | None
    per_sector: list
    ambiguous: bool
    region: str
    level: tuple

    @property
    def roots(self):
        return [z for sc in self.per_sector for z in sc.roots]


def count_eigenvalues(
    pot: RadialPotential,
    lam: float,
    region: HalfDisk = GLOBAL_REGION,
    sectors: Sequence[AngularSector] = (AngularSector(3, 0),),
    h: float = 0.01,
    margin: float = 3.0,
    weighted: bool = True,
    seeds=(),
) -> CountResult:
    """Eigenvalues of H(lambda) in ``region`` summed over sectors.

    Per sector: winding number of the Jost function on the region boundary
    and Newton roots inside it; disagreement marks the count ambiguous.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if lam == 0:
        return _count_self_adjoint(pot, region, sectors, h, margin, weighted)
    parts = []
    ambiguous = False
    total = 0
    for s in sectors:
        op = lattice_operator(pot, s, lam, h=h, margin=margin)
        n, diag = count_zeros(lambda z, op=op: jost(op, z), region)
        roots = locate_roots(op, region, seeds=seeds)
        if n is None or n != len(roots):
            ambiguous = True
        w = s.degeneracy if weighted else 1
        parts.append(SectorCount(s.ell, n, roots, diag["winding"], w))
        total = None if (total is None or n is None) else total + w * n
    return CountResult(total, parts, ambiguous, region.describe(), (h, margin))


def _count_self_adjoint(pot, region, sectors, h, margin, weighted) -> CountResult:
    """Negative eigenvalues of H1 inside ``region``, by winding on a disk over (-R, -1e-3).

    At lambda = 0 the eigenvalues lie on the real axis, i.e. on the boundary of
    a lower half-disk, so a full disk symmetric about the negative axis is
    used instead.  Each sector count is cross-checked against the Sturm node
    count of the zero-energy solution when the disk reaches below -max|V1|,
    i.e. covers every bound state.
    """
    lo = region.center - region.radius
    hi = min(region.center + region.radius, 0.0) - 1e-3
    if hi <= lo:
        return CountResult(0, [], False, region.describe(), (h, margin))
    disk = Disk(0.5 * (lo + hi), 0.5 * (hi - lo))
    parts = []
    ambiguous = False
    total = 0
    for s in sectors:
        op = lattice_operator(pot, s, 0.0, h=h, margin=margin)
        n, diag = count_zeros(lambda z, op=op: jost(op, z), disk)
        if n is None:
            ambiguous = True
        elif lo < -float(np.max(np.abs(pot.V1(op.r)))):
            nodes, _ = zero_energy_census(pot, s)
            ambiguous |= n != nodes
        w = s.degeneracy if weighted else 1
        parts.append(SectorCount(s.ell, n, [], diag["winding"], w))
        total = None if (total is None or n is None) else total + w * n
    return CountResult(total, parts, ambiguous, disk.describe(), (h, margin))


def threshold_counts(pot: RadialPotential, sectors: Sequence[AngularSector], weighted: bool = True):
    """(N1, k, k0) of H1 from the zero-energy solution in each sector."""
    N1 = k = k0 = 0
    for s in sectors:
        nodes, kind = zero_energy_census(pot, s)
        w = s.degeneracy if weighted else 1
        N1 += w * nodes
        if kind == "eigenvalue":
            k0 += w
            N1 += w
        elif kind == "resonance":
            k += w
    return N1, k, k0


@dataclass
class CensusReport:
    scenario: str
    status: str
    N1: int | None
    k: int | None
    k0: int | None
    counts: dict
    checklist: dict
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "status": self.status,
            "N1": self.N1,
            "k": self.k,
            "counts": {f"{lam:g}": c for lam, c in self.counts.items()},
        }


def verify_counting_law(sc: Scenario, refine: int = 2, check_hypotheses: bool = True) -> CensusReport:
    """PASS iff N(lambda) = N1 + k for every lambda on every refinement level.

    Returns SKIPPED (not FAIL) when the hypothesis checklist fails.
    """
    checks = hypothesis_checklist(sc) if check_hypotheses else {}
    if check_hypotheses and not all(checks.values()):
        return CensusReport(sc.name, "SKIPPED", None, None, None, {}, checks, {"reason": "hypotheses not met"})
    N1, k, k0 = threshold_counts(sc.pot, sc.sectors, sc.weighted)
    law_k = k if sc.law == RESONANCE else 0
    target = N1 + law_k
    failures = []
    if (N1, k, k0) != (sc.expected.N1, sc.expected.k, sc.expected.k0):
        failures.append(f"threshold data (N1, k, k0) = {(N1, k, k0)} differ from expected {asdict(sc.expected)}")
    counts = {}
    diag: dict = {"levels": {}, "roots": {}}
    for lam in sc.lambda_grid:
        per_level = []
        for h, margin in refinement_levels(sc.h, refine):
            res = count_eigenvalues(sc.pot, lam, GLOBAL_REGION, sc.sectors, h, margin, sc.weighted)
            per_level.append(res.total)
            if res.ambiguous:
                failures.append(f"lambda={lam}, h={h}, margin={margin}: winding and located roots disagree")
            diag["roots"].setdefault(f"{lam:g}", [[z.real, z.imag] for z in res.roots])
        diag["levels"][f"{lam:g}"] = per_level
        counts[lam] = per_level[0]
        if len(set(per_level)) != 1:
            failures.append(f"lambda={lam}: count changes under refinement {per_level}")
        if per_level[0] != target:
            failures.append(f"lambda={lam}: N = {per_level[0]} but N1 + k = {target}")
    diag["failures"] = failures
    status = "PASS" if not failures else "FAIL"
    return CensusReport(sc.name, status, N1, k, k0, counts, checks, diag)


def no_accumulation_scan(
    pot: RadialPotential,
    lam: float,
    E0: float = 1.0,
    delta: float = 0.2,
    sectors: Sequence[AngularSector] = (AngularSector(3, 0),),
    h: float = 0.01,
    refine: int = 1,
    dirichlet: dict | None = None,
):
    """True iff no eigenvalue is confirmed in D_-(E0, delta) at every level.

    Two independent certificates: zero winding of the Jost function on the
    transparent lattice, and no candidate of the dense Dirichlet spectrum
    passing the refinement/localization protocol.  Returns (ok, diagnostics).
    """
    if not E0 >= 4 * delta or E0 <= 0:
        raise ValueError(f"need E0 >= 4 delta > 0, got E0={E0}, delta={delta}")
    region = HalfDisk(E0, delta)
    dirichlet = dirichlet or {"r_max": 20.0, "n_points": 399}
    diag = {"winding": [], "confirmed": []}
    ok = True
    for s in sectors:
        for h_l, margin in refinement_levels(h, refine):
            op = lattice_operator(pot, s, lam, h=h_l, margin=margin)
            n, _ = count_zeros(lambda z, op=op: jost(op, z), region)
            diag["winding"].append(n)
            ok &= n == 0
        dop = discretize(pot, s, lam, **dirichlet)
        cands = complex_spectrum(dop, check=False)
        cands = [c for c in cands if abs(c - E0) < delta and c.imag <= 0]
        rep = confirm_point_spectrum(pot, s, lam, cands, window=None, **dirichlet)
        diag["confirmed"].append([e.z for e in rep.confirmed])
        ok &= rep.count == 0
    return bool(ok), diag


def birman_schwinger_guard(
    pot: RadialPotential,
    lam: float,
    regions: Sequence[HalfDisk],
    sector: AngularSector = AngularSector(3, 0),
    n_grid: int = 20,
    **lattice,
) -> float:
    """Max of the Birman-Schwinger norm over polar grids strictly inside each half-disk."""
    best = 0.0
    for reg in regions:
        radii = reg.radius * (np.arange(1, n_grid + 1) - 0.5) / n_grid
        angles = np.pi + np.pi * (np.arange(1, n_grid + 1) - 0.5) / n_grid
        for rad in radii:
            for ang in angles:
                z = reg.center + rad * np.exp(1j * ang)
                best = max(best, birman_schwinger_norm(pot, sector, lam, z, **lattice))
    return best


def _dense_sector_eigenvalues(pot, sector, lam, h, region, outer_mass=0.01):
    if abs(sector.nu - 0.5) < 1e-14:
        z = transparent_spectrum(lattice_operator(pot, sector, lam, h=h))
    else:
        # Dirichlet box: keep only modes localized away from the wall
        op = lattice_operator(pot, sector, lam, h=h, margin=7.0).with_closure("dirichlet")
        w, v = sla.eig(op.dense())
        k = int(round(0.8 * op.size))
        mass = np.sum(np.abs(v[k:]) ** 2, axis=0) / np.sum(np.abs(v) ** 2, axis=0)
        z = w[mass < outer_mass]
    return [complex(x) for x in z if region.contains(complex(x)) and abs(x) > 1e-3]


def dense_cross_check(sc: Scenario, lam: float, h: float | None = None, region: HalfDisk = GLOBAL_REGION):
    """Count from a full dense spectrum versus the Jost-function count at one lambda.

    Order-1/2 sectors use the exact transparent spectrum (companion
    linearization); other sectors use localized modes of the Dirichlet box.
    Returns (agree, dense_count, jost_count, dense_eigenvalues).
    """
    h = h or sc.h
    dense = []
    total = 0
    for s in sc.sectors:
        zs = _dense_sector_eigenvalues(sc.pot, s, lam, h, region)
        dense.extend(zs)
        total += (s.degeneracy if sc.weighted else 1) * len(zs)
    res = count_eigenvalues(sc.pot, lam, region, sc.sectors, h, 3.0, sc.weighted)
    return total == res.total, total, res.total, dense


# ---------------------------------------------------------------------------
# builtin scenarios


@lru_cache(maxsize=None)
def _critical(n: int, ell: int) -> float:
    return critical_coupling(RadialPotential(square_well(-1.0)), AngularSector(n, ell))


def builtin_scenarios(lambda_grid=(0.02, 0.05, 0.1, 0.2), n_ell: int = 5) -> list:
    """Subcritical, supercritical, resonant and l = 1 zero-eigenvalue unit square wells (n = 3)."""
    lam = tuple(lambda_grid)
    sectors = tuple(AngularSector(3, ell) for ell in range(n_ell))
    beta_res = _critical(3, 0)
    beta_l1 = _critical(3, 1)
    well = square_well(-1.0)
    return [
        Scenario(
            "subcritical",
            RadialPotential(well, square_well(1.0), beta=1.0),
            sectors,
            lam,
            Expected(0, 0, 0),
            REGULAR,
            description="depth 1 below the first threshold depth pi^2/4; V2 = -V1",
        ),
        Scenario(
            "supercritical",
            RadialPotential(well, square_well(4.0), beta=4.0),
            sectors,
            lam,
            Expected(1, 0, 0),
            REGULAR,
            description="depth 4: one s-wave bound state; V2 = -V1",
        ),
        Scenario(
            "critical_resonance",
            RadialPotential(well, square_well(beta_res), beta=beta_res),
            sectors,
            lam,
            Expected(0, 1, 0),
            RESONANCE,
            description="depth at the s-wave critical coupling: zero is a resonance; V2 = -V1",
        ),
        Scenario(
            "l1_zero_eigenvalue",
            RadialPotential(well, square_well(1.0), beta=beta_l1),
            (AngularSector(3, 1),),
            lam,
            Expected(1, 0, 1),
            ZERO_EIGENVALUE,
            weighted=False,
            description="depth at the p-wave critical coupling: zero is an l = 1 eigenvalue; "
            "radial count in the l = 1 sector, V2 = unit well",
        ),
    ]
