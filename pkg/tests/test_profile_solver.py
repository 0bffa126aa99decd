import numpy as np
import pytest
from mpmath import mp, mpf

from lib.errors import DomainError, NewtonDiverged, WindowExit
from lib.phase_core import sonic_data
from lib.profile_solver import (SolverOptions, admissible_kappa_window, classify_kappa, continue_in_parameter,
                                continuous_residual, default_tolerance, emden_to_physical, interpolate, newton_solve,
                                physical_to_emden, sample_uniform)


def sqrt2_operator(u, jacobian):
    F = np.array([u[0]**2 - 2], dtype=object)
    J = np.array([[2*u[0]]], dtype=object) if jacobian else None
    return F, J


def test_newton_converges_quadratically():
    u, report = newton_solve(sqrt2_operator, np.array([mpf(1)], dtype=object), mpf('1e-25'))
    assert abs(u[0] - mp.sqrt(2)) < mpf('1e-25')
    assert report.iterations <= 8
    assert report.dps == mp.dps


def test_newton_reports_missing_convergence():
    def no_root(u, jacobian):
        F = np.array([u[0]**2 + 1], dtype=object)
        return F, (np.array([[2*u[0]]], dtype=object) if jacobian else None)

    with pytest.raises(NewtonDiverged):
        newton_solve(no_root, np.array([mpf(3)], dtype=object), mpf('1e-25'), max_iter=10)


def test_default_tolerance_follows_precision():
    assert default_tolerance(50) == mpf(10)**-30
    assert default_tolerance(30) == mpf(10)**-18


def test_physical_to_emden_inverts_the_profile_transform():
    ell, Z, sigma, omega = mpf(2), mpf('0.7'), mpf('1.3'), mpf('0.4')
    rho = (mp.sqrt(ell/2)*Z*sigma)**ell
    p = physical_to_emden(rho, -Z*omega, Z, ell)
    assert abs(p.sigma - sigma) < mpf('1e-25')
    assert abs(p.omega - omega) < mpf('1e-25')


@pytest.mark.slow
def test_interior_solve_pins_delta(interior_profile):
    sol = interior_profile
    assert abs(sol.delta - 1) < 1000*default_tolerance()
    assert sol.Z2 > 0
    assert not sol.has_exterior
    assert sol.newton_report['interior'].residual < default_tolerance()


@pytest.mark.slow
def test_interior_profile_hits_the_sonic_point(interior_profile):
    sol = interior_profile
    p = interpolate(sol, sol.Z2)
    Delta = (p.omega - 1)**2 - p.sigma**2
    assert abs(Delta) < mpf('1e-10')
    assert interpolate(sol, 0).omega == sol.params.omega0
    with pytest.raises(DomainError):
        interpolate(sol, 2*sol.Z2)


@pytest.mark.slow
def test_physical_fields_are_regular_at_the_origin(interior_profile):
    phys = emden_to_physical(interior_profile)
    assert phys.u(0) == 0
    assert phys.rho(0) > 0
    rows = sample_uniform(interior_profile, n=20)
    assert len(rows) == 20
    assert abs(rows[-1][0] - interior_profile.Z2) < mpf('1e-25')


@pytest.mark.slow
def test_exterior_solve_meets_P2_and_the_tail(exterior_profile):
    sol = exterior_profile
    sonic = sonic_data(sol.params)
    tol = default_tolerance()
    assert sol.has_exterior
    assert sol.params.eta > 0
    assert sol.newton_report['exterior'].residual < tol
    assert abs(sol.sigma_ext[sol.grid2.N] - sonic.sigma2) < 100*tol
    assert abs(sol.omega_ext[sol.grid2.N] - sonic.omega2) < 100*tol
    inside, outside = sol.grid2.interpolate(sol.omega_ext, sol.Zp2), sol.tail.at(sol.Zp2).omega
    assert abs(inside - outside) < mpf('1e-10')
    phys = emden_to_physical(sol)
    assert 0 < phys.rho(10*sol.Zp2) < phys.rho(sol.Zp2)


@pytest.mark.slow
def test_profile_round_trip_keeps_the_exterior(exterior_profile):
    restored = type(exterior_profile).from_dict(exterior_profile.to_dict())
    assert restored.params == exterior_profile.params
    assert list(restored.sigma_ext) == list(exterior_profile.sigma_ext)
    assert restored.tail.sigma_tower == exterior_profile.tail.sigma_tower
    assert abs(continuous_residual(restored) - continuous_residual(exterior_profile)) < mpf('1e-25')


@pytest.mark.slow
def test_continuation_without_steps_is_the_identity(interior_profile):
    assert continue_in_parameter(interior_profile, interior_profile.params, 0) is interior_profile


@pytest.mark.slow
def test_continuation_in_r_follows_nu(interior_profile):
    target = interior_profile.params.with_(r=mpf('1.21'))
    sol = continue_in_parameter(interior_profile, target, 1, SolverOptions(N1=24, N2=24, interior_only=True))
    assert sol.params.r == mpf('1.21')
    assert sol.newton_report['interior'].residual < default_tolerance()
    assert sonic_data(sol.params).nu > sonic_data(interior_profile.params).nu


@pytest.mark.slow
def test_continuation_in_kappa_stops_at_the_window(exterior_profile):
    target = exterior_profile.params.with_(kappa=mpf(10))
    with pytest.raises(WindowExit) as e:
        continue_in_parameter(exterior_profile, target, 3, SolverOptions(N1=32, N2=32))
    assert e.value.last_good is not None


@pytest.mark.slow
def test_kappa_window_contains_the_stock_kappa(stock_params):
    lo, hi = admissible_kappa_window(stock_params, samples=31, xtol=1e-3)
    assert lo < stock_params.kappa < hi
    assert classify_kappa(stock_params, (lo + stock_params.kappa)/2)
