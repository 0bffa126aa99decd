from types import SimpleNamespace

import numpy as np
import pytest
from mpmath import mpf

from lib import mode_solver
from lib.errors import DomainError, InsufficientData, MissingGaugeMode
from lib.mode_solver import (ModeKind, ModeParams, ModeSolution, analytic_modes, build_one_mode, build_zero_mode,
                             find_smooth_mode_exponents, leading_exponent_fit,
                             mode_residual, normalize_for_evolution, omega1_trend, omega_bounds, regularity_N)
from lib.phase_core import EulerParams, sonic_data
from lib.smooth_scan import MINUS, nu_interval


def params_with_nu_above_one() -> EulerParams:
    for k in (1, 2, 3):
        try:
            a, b = nu_interval(3, 2, k)
        except DomainError:
            continue
        return EulerParams.create(3, 2, (a + b)/2)
    pytest.skip('no r with nu > 1 for (d, ell) = (3, 2)')


def test_regularity_exponent_at_the_window_edges():
    params = params_with_nu_above_one()
    sonic = sonic_data(params)
    Omega_min, Omega_max = omega_bounds(params, sonic)
    assert abs(regularity_N(params, 0, sonic) - sonic.nu) < mpf('1e-25')
    assert abs(regularity_N(params, Omega_max, sonic) - 1) < mpf('1e-25')
    assert Omega_min == (1 - params.r)*min(params.ell, 1)
    assert Omega_min < 0 < Omega_max


def test_regularity_exponent_decreases_with_Omega():
    params = params_with_nu_above_one()
    assert regularity_N(params, mpf('0.5')) < regularity_N(params, mpf('0.1'))


def test_omega1_trend_fits_a_line():
    a, b, residual = omega1_trend([(1.1, 0.7), (1.2, 0.9), (1.3, 1.1)])
    assert a == pytest.approx(2.0)
    assert b == pytest.approx(-1.5)
    assert residual < 1e-12


def test_omega1_trend_needs_two_points():
    with pytest.raises(InsufficientData):
        omega1_trend([(1.1, 0.7)])


@pytest.mark.slow
def test_analytic_modes_solve_the_linearized_equations(interior_profile):
    scaling, gauge = analytic_modes(interior_profile)
    assert scaling.params.classification == ModeKind.SCALING
    assert gauge.params.classification == ModeKind.GAUGE
    assert scaling.params.Omega == 0
    assert gauge.params.Omega == interior_profile.params.r
    for mode in (scaling, gauge):
        assert mode_residual(mode) < mpf('1e-10')


def interior_stub():
    return SimpleNamespace(params=EulerParams.create(3, 2, '1.2'), has_exterior=False)


def mid_band_Omega(params, band):
    """Ω with N(Ω) = band + 1/2"""
    sonic = sonic_data(params)
    return (band + mpf('0.5') - sonic.nu)*params.L/(2*(sonic.nu + 1))


def test_smooth_modes_start_with_the_gauge_mode(monkeypatch):
    sol = interior_stub()
    other = mid_band_Omega(sol.params, 3)
    monkeypatch.setattr(mode_solver, 'c_plus_N', lambda _, Omega: (Omega - sol.params.r)*(Omega - other))
    scan = find_smooth_mode_exponents(sol, samples=80, margin=0.2)
    Omegas = [m.Omega for m in scan.modes]
    assert len(Omegas) == 2
    assert abs(Omegas[0] - sol.params.r) < mpf('1e-6')
    assert abs(Omegas[1] - other) < mpf('1e-6')
    assert all(m.theta is None for m in scan.modes)
    assert scan.samples


def test_smooth_modes_without_the_gauge_mode_are_refused(monkeypatch):
    sol = interior_stub()
    other = mid_band_Omega(sol.params, 3)
    monkeypatch.setattr(mode_solver, 'c_plus_N', lambda _, Omega: (Omega - mpf('0.9'))*(Omega - other))
    with pytest.raises(MissingGaugeMode) as e:
        find_smooth_mode_exponents(sol, samples=80, margin=0.2)
    assert e.value.Omega is None or abs(e.value.Omega - sol.params.r) > mpf('1e-4')


def test_smooth_modes_with_no_zero_at_all(monkeypatch):
    monkeypatch.setattr(mode_solver, 'c_plus_N', lambda _, Omega: mpf(1) + Omega**2)
    with pytest.raises(MissingGaugeMode) as e:
        find_smooth_mode_exponents(interior_stub(), samples=20)
    assert e.value.Omega is None


def nodal_mode(alpha):
    alpha = np.array([mpf(a) for a in alpha], dtype=object)
    return ModeSolution(None, ModeParams(mpf('0.5'), mpf(3), ModeKind.ONE), alpha, alpha.copy())


def test_normalization_puts_the_largest_value_at_one():
    out = normalize_for_evolution(nodal_mode(['2', '-1', '0.5']))
    assert list(out.alpha1) == [1, mpf('-0.5'), mpf('0.25')]
    out = normalize_for_evolution(nodal_mode(['1', '-4', '0']))
    assert list(out.alpha1) == [mpf('-0.25'), 1, 0]


@pytest.mark.parametrize('alpha', [['1', '-1'], ['0', '0'], ['3', '0', '-3']])
def test_normalization_refuses_ties_and_zero_modes(alpha):
    with pytest.raises(DomainError):
        normalize_for_evolution(nodal_mode(alpha))


@pytest.mark.slow
def test_zero_mode_vanishes_inside_and_grows_like_its_exponent(exterior_profile):
    sol = exterior_profile
    Omega = mid_band_Omega(sol.params, 2)
    mode = build_zero_mode(sol, Omega)
    assert mode.params.classification == ModeKind.ZERO
    assert all(a == 0 for a in mode.alpha1)
    assert abs(mode.alpha2[sol.grid2.N]) < mpf('1e-20')
    assert abs(mode.beta2[sol.grid2.N]) < mpf('1e-20')
    N = regularity_N(sol.params, Omega)
    assert abs(mode.leading_exponent - N) < mpf('0.05')*N
    exponent, coefficient = leading_exponent_fit(mode, MINUS)
    assert abs(coefficient - 1) < mpf('1e-6')
    normalized = normalize_for_evolution(mode)
    assert abs(max(normalized.alpha2) - 1) < mpf('1e-25')


@pytest.mark.slow
def test_one_mode_is_regular_at_the_origin_and_glued_at_Z2(exterior_profile):
    sol = exterior_profile
    Omega = mid_band_Omega(sol.params, 3)
    mode = build_one_mode(sol, Omega, mpf('-1.5'))
    N1, N2 = sol.grid1.N, sol.grid2.N
    assert mode.params.classification == ModeKind.ONE
    assert abs(mode.alpha1[N1] - 1) < mpf('1e-20')
    assert abs(mode.beta1[N1]) < mpf('1e-20')
    assert abs(mode.beta2[N2] - mode.beta1[0]) < mpf('1e-20')
    assert mode.tail is not None
    assert mode.coefficients


@pytest.mark.slow
def test_gauge_mode_is_the_greatest_smooth_exponent(interior_profile):
    scan = find_smooth_mode_exponents(interior_profile, samples=20, gauge_tol=1e-2)
    Omegas = [m.Omega for m in scan.modes]
    assert abs(Omegas[0] - interior_profile.params.r) < mpf('1e-2')
    assert all(a > b for a, b in zip(Omegas, Omegas[1:]))
