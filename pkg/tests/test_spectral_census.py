import math
from dataclasses import replace

import pytest

from thresholdlab.model_resolvent import AngularSector
from thresholdlab.radial_operator import HalfDisk, RadialPotential, square_well, zero_profile
from thresholdlab.spectral_census import (
    BUILTIN_NAMES,
    GLOBAL_REGION,
    REGULAR,
    RESONANCE,
    Expected,
    Scenario,
    birman_schwinger_guard,
    builtin_scenarios,
    count_eigenvalues,
    dense_cross_check,
    hypothesis_checklist,
    no_accumulation_scan,
    refinement_levels,
    threshold_counts,
    verify_counting_law,
)

S_WAVE = AngularSector(3, 0)


@pytest.fixture(scope="module")
def scenarios():
    return {sc.name: sc for sc in builtin_scenarios()}


def test_builtin_library(scenarios):
    assert tuple(scenarios) == BUILTIN_NAMES
    assert scenarios["critical_resonance"].pot.beta == pytest.approx(math.pi**2 / 4, abs=1e-10)
    assert scenarios["l1_zero_eigenvalue"].pot.beta == pytest.approx(math.pi**2, abs=1e-10)
    assert scenarios["critical_resonance"].law == RESONANCE


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_hypothesis_checklist_passes(scenarios, name):
    checks = hypothesis_checklist(scenarios[name])
    assert all(checks.values()), checks
    assert ("sign_condition" in checks) == (name == "critical_resonance")


def test_checklist_failure_skips_instead_of_failing(scenarios):
    sc = scenarios["subcritical"]
    undamped = replace(sc, pot=RadialPotential(square_well(-1.0), zero_profile(), beta=1.0))
    rep = verify_counting_law(undamped)
    assert rep.status == "SKIPPED" and rep.checklist["dissipative"] is False
    slow = replace(sc, pot=replace(sc.pot, rho2=2.5))
    assert verify_counting_law(slow).status == "SKIPPED"


@pytest.mark.parametrize(
    "name, expected",
    [("subcritical", (0, 0, 0)), ("supercritical", (1, 0, 0)), ("critical_resonance", (0, 1, 0)), ("l1_zero_eigenvalue", (1, 0, 1))],
)
def test_threshold_counts(scenarios, name, expected):
    sc = scenarios[name]
    assert threshold_counts(sc.pot, sc.sectors, sc.weighted) == expected


def test_full_space_weighting(scenarios):
    # the l = 1 zero eigenvalue is threefold in R^3; with the s-wave bound state N1 = 1 + 3
    pot = scenarios["l1_zero_eigenvalue"].pot
    sectors = [AngularSector(3, ell) for ell in range(3)]
    assert threshold_counts(pot, sectors, weighted=True) == (4, 0, 3)
    assert threshold_counts(pot, sectors, weighted=False) == (2, 0, 1)


@pytest.mark.parametrize("name, expected", [("subcritical", 0), ("supercritical", 1)])
def test_self_adjoint_count(scenarios, name, expected):
    sc = scenarios[name]
    res = count_eigenvalues(sc.pot, 0.0, GLOBAL_REGION, sc.sectors)
    assert res.total == expected and not res.ambiguous


def test_emergent_eigenvalue_counted_near_threshold(scenarios):
    sc = scenarios["critical_resonance"]
    res = count_eigenvalues(sc.pot, 0.1, HalfDisk(0.0, 0.5), (S_WAVE,))
    assert res.total == 1 and not res.ambiguous
    (z,) = res.roots
    assert z.imag < 0 and abs(z) < 0.5


@pytest.mark.parametrize("name", ["subcritical", "critical_resonance"])
def test_count_stable_under_refinement(scenarios, name):
    sc = scenarios[name]
    counts = {
        count_eigenvalues(sc.pot, 0.05, GLOBAL_REGION, sc.sectors[:2], h, m).total for h, m in refinement_levels(sc.h, 2)
    }
    assert len(counts) == 1


def test_count_rejects_negative_lambda(scenarios):
    with pytest.raises(ValueError):
        count_eigenvalues(scenarios["subcritical"].pot, -0.1)


def test_refinement_levels():
    assert refinement_levels(0.01, 0) == [(0.01, 3.0)]
    assert refinement_levels(0.01, 2) == [(0.01, 3.0), (0.005, 3.0), (0.01, 7.0)]


def test_counting_law_reduced(scenarios):
    sc = replace(scenarios["critical_resonance"], sectors=(S_WAVE,), lambda_grid=(0.05,))
    sc = replace(sc, expected=Expected(0, 1, 0))
    rep = verify_counting_law(sc, refine=1)
    assert rep.status == "PASS", rep.diagnostics["failures"]
    assert rep.counts == {0.05: 1}


def test_counting_law_reports_wrong_expectation(scenarios):
    sc = replace(scenarios["supercritical"], sectors=(S_WAVE,), lambda_grid=(0.1,), expected=Expected(0))
    rep = verify_counting_law(sc, refine=0)
    assert rep.status == "FAIL"
    assert any("expected" in f for f in rep.diagnostics["failures"])


@pytest.mark.parametrize("name", ["supercritical", "critical_resonance"])
def test_dense_cross_check(scenarios, name):
    sc = replace(scenarios[name], sectors=(S_WAVE,))
    agree, dense, jost_count, zs = dense_cross_check(sc, 0.1, h=0.02)
    assert agree and dense == jost_count == 1
    assert zs[0].imag < 0


def test_no_accumulation(scenarios):
    ok, diag = no_accumulation_scan(scenarios["supercritical"].pot, 0.1, sectors=(S_WAVE,))
    assert ok and diag["winding"] == [0, 0]
    with pytest.raises(ValueError):
        no_accumulation_scan(scenarios["supercritical"].pot, 0.1, E0=0.0)
    with pytest.raises(ValueError):
        no_accumulation_scan(scenarios["supercritical"].pot, 0.1, E0=0.5, delta=0.2)


def test_birman_schwinger_guard_small_grid(scenarios):
    pot = scenarios["subcritical"].pot
    val = birman_schwinger_guard(pot, 0.2, [HalfDisk(-0.5, 0.3), HalfDisk(1.0, 0.2)], n_grid=5)
    assert 0 < val < 1
    assert birman_schwinger_guard(pot, 0.1, [HalfDisk(-0.5, 0.3)], n_grid=5) == pytest.approx(
        0.5 * birman_schwinger_guard(pot, 0.2, [HalfDisk(-0.5, 0.3)], n_grid=5), rel=1e-12
    )


def test_scenario_serialization(scenarios):
    d = scenarios["l1_zero_eigenvalue"].to_dict()
    assert d["law"] == "threshold_eigenvalue" and d["weighted"] is False
    assert d["sectors"] == [{"n": 3, "ell": 1}]
    assert d["potential"]["v2"] == {"kind": "square_well", "amplitude": 1.0, "radius": 1.0}


def test_user_scenario_regular_threshold():
    pot = RadialPotential(square_well(-1.0), square_well(0.5), beta=2.0)
    sc = Scenario("mild", pot, (S_WAVE, AngularSector(3, 1)), (0.1,), Expected(0), REGULAR)
    assert verify_counting_law(sc, refine=0).status == "PASS"
