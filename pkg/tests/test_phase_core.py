import pytest
from mpmath import mp, mpf

from lib.errors import DomainError
from lib.phase_core import (EulerParams, admissible_window, critical_speed, field_components,
                            s1_plus_w1_closed_form, singular_points, sonic_data, sonic_roots, t2_identity)


def test_critical_speed_below_ell_equals_d():
    r_star, r_plus, r_crit = critical_speed(3, 2)
    assert r_star == pytest.approx(float(mpf(5)/(2 + mp.sqrt(3))), rel=1e-15)
    assert r_plus == pytest.approx(float(1 + mpf(2)/(1 + mp.sqrt(2))**2), rel=1e-15)
    assert r_crit == r_star


def test_critical_speed_above_ell_equals_d():
    r_star, r_plus, r_crit = critical_speed(3, 5)
    assert r_crit == r_plus


def test_critical_speeds_coincide_at_ell_equals_d():
    r_star, r_plus, _ = critical_speed(3, 3)
    assert abs(r_star - r_plus) < mpf('1e-25')


@pytest.mark.parametrize('d, ell, r', [(3, 2, '1.5'), (3, 2, '1'), (1, 2, '1.1'), (3, -1, '1.1')])
def test_create_rejects_parameters_outside_the_window(d, ell, r):
    with pytest.raises(DomainError):
        EulerParams.create(d, ell, r)


def test_derived_quantities(stock_params):
    assert stock_params.gamma == 2
    assert stock_params.omega0 == stock_params.ell*(stock_params.r - 1)/3
    assert stock_params.L < 0
    assert admissible_window(3, 2) == (1, stock_params.r_crit)


def test_params_to_dict_keeps_kappa_and_eta(stock_params):
    restored = EulerParams.from_dict(stock_params.to_dict())
    assert restored == stock_params


def test_sonic_roots_solve_the_quadratic(stock_params):
    d, ell, r = stock_params.d, stock_params.ell, stock_params.r
    for s in sonic_roots(stock_params):
        assert abs((d - 1)*s**2 - (d - 1 - (ell - 1)*(r - 1))*s + (r - 1)) < mpf('1e-25')


@pytest.mark.parametrize('name', ['P2', 'P3'])
def test_sonic_points_are_singular(stock_params, name):
    sigma, omega = singular_points(stock_params)[name]
    for value in field_components(sigma, omega, stock_params):
        assert abs(value) < mpf('1e-25')


@pytest.mark.parametrize('d, ell, r', [(3, 2, '1.2'), (3, 2, '1.3'), (2, '1.4', '1.1'), (4, 5, '1.15')])
def test_sonic_identities(d, ell, r):
    params = EulerParams.create(d, ell, r)
    sonic = sonic_data(params)
    assert abs(t2_identity(sonic, params) - sonic.nu) < mpf('1e-25')
    assert abs(sonic.s1 + sonic.w1 - s1_plus_w1_closed_form(sonic, params)) < mpf('1e-25')
    assert sonic.omega2 == 1 - sonic.sigma2
