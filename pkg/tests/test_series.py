import pytest
from mpmath import mp, mpf

from lib.errors import DomainError, IntegerNuError
from lib.phase_core import EulerParams, sonic_data
from lib.series import (Location, s_compose, s_div, s_mul, s_pow, series_at_infinity, series_at_origin, series_at_sonic,
                        series_in_z, series_residual)


def as_floats(series):
    return [float(c) for c in series]


def test_truncated_products_and_quotients():
    one_plus_t = [mpf(1), mpf(1), mpf(0), mpf(0)]
    assert as_floats(s_mul(one_plus_t, one_plus_t)) == [1, 2, 1, 0]
    assert as_floats(s_pow(one_plus_t, 2)) == pytest.approx([1, 2, 1, 0], abs=1e-25)
    assert as_floats(s_div([mpf(1), 0, 0, 0], [mpf(1), mpf(-1), 0, 0])) == [1, 1, 1, 1]


def test_square_root_series():
    half = s_pow([mpf(1), mpf(1), mpf(0), mpf(0)], mpf('0.5'))
    assert as_floats(half) == pytest.approx([1, 0.5, -0.125, 0.0625], abs=1e-25)


def test_composition_with_a_vanishing_inner_series():
    # f(a) = 1 + a + a^2 with a = t
    assert as_floats(s_compose([mpf(1), mpf(1), mpf(1), mpf(0)], [mpf(0), mpf(1), mpf(0), mpf(0)])) == [1, 1, 1, 0]


def test_power_needs_a_constant_term():
    with pytest.raises(DomainError):
        s_pow([mpf(0), mpf(1)], 2)


def test_origin_series_starts_at_P6(stock_params):
    origin = series_at_origin(stock_params, 12)
    assert origin.location == Location.ORIGIN
    assert origin.sigma_tower[0] == 1
    assert origin.omega_tower[0] == stock_params.omega0


def test_origin_series_residual_shrinks_towards_the_origin(stock_params):
    origin = series_at_origin(stock_params, 12)
    coarse = series_residual(origin, stock_params, mpf('0.05'))
    fine = series_residual(origin, stock_params, mpf('0.025'))
    assert fine < coarse
    assert coarse < mpf('1e-6')


def test_origin_series_scales_with_delta(stock_params):
    unit = series_at_origin(stock_params, 8, delta=1)
    scaled = series_at_origin(stock_params, 8, delta=2)
    assert scaled.sigma_tower[0] == 2
    # S(Z) = δ S_unit(Z/δ): the Z^2 coefficient scales as 1/δ
    assert abs(scaled.sigma_tower[2] - unit.sigma_tower[2]/2) < mpf('1e-25')


def test_infinity_series_needs_kappa():
    with pytest.raises(DomainError):
        series_at_infinity(EulerParams.create(3, 2, '1.2'))


def test_infinity_series_is_accurate_far_out(stock_params):
    tail = series_at_infinity(stock_params, 10)
    assert series_residual(tail, stock_params, mpf(1000)) < mpf('1e-15')
    p = tail.at(mpf(1000))
    assert p.omega/p.sigma == pytest.approx(float(stock_params.kappa), rel=1e-2)


def test_sonic_series_starts_at_P2_along_the_minus_slope(stock_params):
    sonic = sonic_data(stock_params)
    expansion = series_at_sonic(stock_params, Location.SONIC_LEFT, 8)
    assert expansion.omega_tower[0] == sonic.omega2
    assert expansion.omega_tower[1] == sonic.omega_minus
    assert expansion.nonint_tower[0] == 1
    assert expansion.omega_of_sigma(sonic.sigma2) == sonic.omega2
    assert expansion.leading_exponent > 1


def test_sonic_series_residual_shrinks_towards_P2(stock_params):
    sonic = sonic_data(stock_params)
    expansion = series_at_sonic(stock_params, Location.SONIC_LEFT, 8)
    coarse = series_residual(expansion, stock_params, sonic.sigma2 + mpf('0.02'))
    fine = series_residual(expansion, stock_params, sonic.sigma2 + mpf('0.01'))
    assert fine < coarse
    assert coarse < mpf('1e-8')


def test_sonic_sides_differ_only_in_the_xi_sign(stock_params):
    left = series_at_sonic(stock_params, Location.SONIC_LEFT, 6)
    right = series_at_sonic(stock_params, Location.SONIC_RIGHT, 6)
    assert left.omega_tower == right.omega_tower
    assert left.xi_sign == -right.xi_sign
    with pytest.raises(ValueError):
        series_at_sonic(stock_params, Location.ORIGIN)


def test_integer_nu_is_refused(stock_params):
    nu = sonic_data(stock_params).nu
    distance = abs(nu - mp.nint(nu))
    with pytest.raises(IntegerNuError) as e:
        series_at_sonic(stock_params, guard=float(distance) + 0.01)
    assert e.value.nu == nu


def test_z_parameterization_starts_with_s1_and_w1(stock_params):
    sonic = sonic_data(stock_params)
    sigma, omega = series_in_z(series_at_sonic(stock_params, Location.SONIC_LEFT, 8), stock_params)
    assert sigma[0] == sonic.sigma2
    assert omega[0] == sonic.omega2
    assert abs(sigma[1] - sonic.s1) < mpf('1e-20')
    assert abs(omega[1] - sonic.w1) < mpf('1e-20')
