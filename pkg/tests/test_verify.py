import pytest

from lib.profile_solver import SolverOptions
from lib.verify import tier0, tier3, verify


def test_tier0_identities_hold():
    rows = tier0(samples=50)
    assert rows
    assert all(passed for _, _, _, _, passed in rows), [row for row in rows if not row[4]]


@pytest.mark.slow
def test_tier1_passes_on_the_stock_profile():
    rows = verify(1, SolverOptions(N1=48, N2=48), samples=50)
    tier1 = [row for row in rows if row[0] == 1]
    checks = [row[1] for row in tier1]
    assert 'profile Newton residual' in checks
    assert 'profile off-grid residual under N doubling' in checks
    assert 'AnalyticScaling residual' in checks
    assert 'AnalyticGauge residual' in checks
    assert all(row[4] for row in rows), [row for row in rows if not row[4]]


@pytest.mark.slow
def test_zero_mode_perturbation_forms_a_shock_near_tau_6():
    rows = tier3()
    assert all(row[4] for row in rows), rows
