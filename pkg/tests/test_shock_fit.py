import numpy as np
import pytest

from lib.errors import FitFailed
from lib.evolution import ShockDiagnostics
from lib.shock_fit import MIN_SAMPLES, fit_all, fit_power_law, shock_fit


TAU_STAR = 5.0


def blow_up(tau, c=2.0, s=1.0):
    return c*(TAU_STAR - tau)**(-s)


def diagnostics_with(tau, **columns) -> ShockDiagnostics:
    diag = ShockDiagnostics()
    diag.records['tau'] = list(tau)
    for name, values in columns.items():
        diag.records[name] = list(values)
    return diag


@pytest.mark.parametrize('s', [0.5, 1.0, 1.5])
def test_power_law_parameters_are_recovered(s):
    tau = np.linspace(0, 4.5, 100)
    fit = fit_power_law(tau, blow_up(tau, s=s), 'max_rho_Z')
    assert fit.tau_star == pytest.approx(TAU_STAR, abs=1e-4)
    assert fit.s == pytest.approx(s, abs=1e-4)
    assert fit.c == pytest.approx(2.0, rel=1e-3)
    assert fit.tau_star_ci[0] <= fit.tau_star <= fit.tau_star_ci[1]
    assert fit.n_samples == 100


def test_noisy_data_gets_a_confidence_interval():
    rng = np.random.default_rng(0)
    tau = np.linspace(0, 4.5, 200)
    q = blow_up(tau)*(1 + 1e-3*rng.standard_normal(len(tau)))
    fit = fit_power_law(tau, q)
    lo, hi = fit.tau_star_ci
    assert lo < fit.tau_star < hi
    assert lo < TAU_STAR + 0.05 and hi > TAU_STAR - 0.05


def test_fit_needs_enough_growing_samples():
    tau = np.linspace(0, 1, MIN_SAMPLES - 1)
    with pytest.raises(FitFailed):
        fit_power_law(tau, blow_up(tau))
    tau = np.linspace(0, 1, 50)
    with pytest.raises(FitFailed):
        fit_power_law(tau, 1/blow_up(tau))


def test_fit_starts_at_the_minimum_and_reports_the_deviation_onset():
    growth = np.linspace(0, 4.5, 100)
    saturated = np.linspace(4.52, 4.9, 20)
    tau = np.concatenate([[-0.2, -0.1], growth, saturated])
    q = np.concatenate([[3.0, 1.0], blow_up(growth), np.full(len(saturated), blow_up(4.5))])
    fit = shock_fit(diagnostics_with(tau, max_rho_Z=q), 'max_rho_Z')
    assert fit.window[0] == 0
    assert fit.tau_star == pytest.approx(TAU_STAR, abs=1e-2)
    assert fit.deviation_onset is not None and fit.deviation_onset > 4.5


def test_fit_all_skips_quantities_without_growth():
    tau = np.linspace(0, 4.5, 60)
    diag = diagnostics_with(tau, max_rho_Z=blow_up(tau), min_u_Z=-blow_up(tau), max_u_ZZ=np.ones(len(tau)))
    fits = fit_all(diag, ('max_rho_Z', 'min_u_Z', 'max_u_ZZ'))
    assert set(fits) == {'max_rho_Z', 'min_u_Z'}
    assert set(diag.fits) == {'max_rho_Z', 'min_u_Z'}
    assert diag.fits['min_u_Z']['s'] == pytest.approx(1.0, abs=1e-3)
