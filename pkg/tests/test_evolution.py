from fractions import Fraction

import numpy as np
import pytest
from mpmath import mpf

from lib.errors import DomainError, PositivityLoss
from lib.evolution import (CONTINUE, MAX_STEPS, POSITIVITY_LOSS, STOP, TAU_MAX, EvolutionControls, adaptive_dt,
                           dissipation, evolve_fields, extend_with_ghosts, fd_weights, make_mapped_grid,
                           evolve, ramp_monitor, rhs, spatial_derivatives)
from lib.mode_solver import build_zero_mode, normalize_for_evolution
from lib.phase_core import EulerParams


PARAMS = EulerParams(3, mpf(2), mpf('1.2'))


def smooth_fields(Z):
    return 1 + 0.5*np.cos(Z), np.sin(Z)


def test_central_weights():
    assert fd_weights((-1, 0, 1), 1) == (Fraction(-1, 2), 0, Fraction(1, 2))
    assert fd_weights((-1, 0, 1), 2) == (1, -2, 1)
    assert fd_weights(tuple(range(-4, 5)), 8) == (1, -8, 28, -56, 70, -56, 28, -8, 1)


def test_one_sided_weights_are_exact_on_polynomials():
    offsets = tuple(range(-7, 1))
    w = fd_weights(offsets, 1)
    for p in range(8):
        exact = 1 if p == 1 else 0
        assert sum(wi*Fraction(o)**p for wi, o in zip(w, offsets)) == exact


def test_stencil_has_to_resolve_the_derivative():
    with pytest.raises(DomainError):
        fd_weights((0, 1), 2)


def test_identity_map_for_a_equal_one():
    grid = make_mapped_grid(10, 101, a=1.0, q=3)
    assert np.allclose(grid.Z, grid.X)
    assert np.allclose(grid.Z_X, 1)
    assert np.allclose(grid.Z_XX, 0)


@pytest.mark.parametrize('shift', [0.0, 2.0, -3.0])
def test_mapped_grid_is_monotone_and_hits_the_ends(shift):
    grid = make_mapped_grid(20, 201, a=0.3, q=3, shift=shift)
    assert grid.Z[0] == 0 and grid.Z[-1] == 20
    assert np.all(grid.Z_X > 0)
    assert np.all(np.diff(grid.Z) > 0)
    assert np.all(grid.Z_ghost < 0)


@pytest.mark.parametrize('kwargs', [dict(a=0.0), dict(q=2), dict(shift=25.0)])
def test_mapped_grid_rejects_bad_controls(kwargs):
    with pytest.raises(DomainError):
        make_mapped_grid(20, 201, **kwargs)


def test_unknown_precision():
    with pytest.raises(DomainError):
        make_mapped_grid(20, 201, precision='quad')


def test_ghosts_mirror_by_parity():
    grid = make_mapped_grid(10, 101)
    rho, u = smooth_fields(grid.Z)
    rho_e = extend_with_ghosts(rho, grid, 1)
    u_e = extend_with_ghosts(u, grid, -1)
    assert np.allclose(rho_e[:4], rho[4:0:-1], atol=1e-12)
    assert np.allclose(u_e[:4], -u[4:0:-1], atol=1e-12)


@pytest.mark.parametrize('a, n, tol', [(1.0, 201, 1e-6), (0.5, 401, 1e-4)])
def test_spatial_derivatives_converge(a, n, tol):
    grid = make_mapped_grid(10, n, a=a)
    Z = grid.Z
    rho, u = smooth_fields(Z)
    D = spatial_derivatives(rho, u, grid)
    assert np.max(np.abs(D['rho_Z'] + 0.5*np.sin(Z))) < tol
    assert np.max(np.abs(D['u_Z'] - np.cos(Z))) < tol
    assert np.max(np.abs(D['rho_ZZ'] + 0.5*np.cos(Z))) < 10*tol
    assert np.max(np.abs(D['u_ZZ'] + np.sin(Z))) < 10*tol


def test_dissipation_ignores_low_order_polynomials_and_damps_the_sawtooth():
    grid = make_mapped_grid(10, 101)
    smooth = 1 + grid.Z**2
    assert np.max(np.abs(dissipation(smooth, grid, 0.1, 1))) < 1e-9

    saw = 1 + 0.01*(-1.0)**np.arange(grid.n_points)
    out = dissipation(saw, grid, 0.1, 1)
    mid = grid.n_points//2
    assert out[mid] == pytest.approx(-0.1*0.01*(-1.0)**mid, rel=1e-9)
    assert np.all(out[-4:] == 0)
    assert np.all(dissipation(saw, grid, 0.0, 1) == 0)


def test_adaptive_dt():
    assert adaptive_dt(2.0, 4.0, 0.1) == pytest.approx(0.05)
    assert adaptive_dt(2.0, 1.0, 0.1) == 0.1
    assert adaptive_dt(2.0, 0.0, 0.1) == 0.1


def test_ramp_monitor():
    assert ramp_monitor(1.0, 0.0, 1e-10, 1.0) == CONTINUE
    assert ramp_monitor(1.0, 25.0, 1e-10, 1.0) == STOP


def test_rhs_rejects_non_positive_density():
    grid = make_mapped_grid(10, 101)
    rho, u = smooth_fields(grid.Z)
    rho[30] = -1e-3
    with pytest.raises(PositivityLoss) as e:
        rhs(rho, u, grid, PARAMS)
    assert e.value.Z == pytest.approx(grid.Z[30])


def test_rhs_keeps_the_origin_at_rest():
    grid = make_mapped_grid(10, 101)
    rho, u = smooth_fields(grid.Z)
    _, d_u = rhs(rho, u, grid, PARAMS)
    assert d_u[0] == 0


def test_evolution_runs_to_tau_max():
    grid = make_mapped_grid(10, 101)
    rho, u = smooth_fields(grid.Z)
    controls = EvolutionControls(Zcut=10, n_points=101, dt0=1e-4, tau_max=1e-3, resolution_bound=1e9)
    run = evolve_fields(rho, u, rho.copy(), u.copy(), grid, PARAMS, None, controls)
    assert run.diagnostics.stop_reason == TAU_MAX
    assert run.state.tau == pytest.approx(1e-3)
    assert run.steps >= 10
    assert len(run.diagnostics) == run.steps + 1
    assert len(run.state.dtau_history) == run.steps


def test_evolution_stops_at_max_steps_and_keeps_snapshots():
    grid = make_mapped_grid(10, 101)
    rho, u = smooth_fields(grid.Z)
    controls = EvolutionControls(Zcut=10, n_points=101, dt0=1e-4, tau_max=1.0, resolution_bound=1e9,
                                 max_steps=6, snapshot_every=2)
    run = evolve_fields(rho, u, rho.copy(), u.copy(), grid, PARAMS, None, controls)
    assert run.diagnostics.stop_reason == MAX_STEPS
    assert run.steps == 6
    assert len(run.snapshots) == 4


def test_evolution_reports_positivity_loss():
    grid = make_mapped_grid(10, 101)
    rho0, u0 = smooth_fields(grid.Z)
    rho = rho0.copy()
    rho[50] = -1e-3
    controls = EvolutionControls(Zcut=10, n_points=101, dt0=1e-4, tau_max=1.0, resolution_bound=1e9)
    run = evolve_fields(rho0, u0, rho, u0.copy(), grid, PARAMS, None, controls)
    assert run.diagnostics.stop_reason == POSITIVITY_LOSS
    assert run.steps == 0


@pytest.mark.slow
def test_perturbed_profile_evolves(exterior_profile):
    mode = normalize_for_evolution(build_zero_mode(exterior_profile, mpf('0.5')))
    controls = EvolutionControls(Zcut=100.0, n_points=513, tau_max=0.02, max_steps=200)
    run = evolve(exterior_profile, mode, 1e-2, controls)
    assert run.diagnostics.stop_reason != POSITIVITY_LOSS
    assert len(run.diagnostics) == run.steps + 1
    assert np.all(run.state.rho > 0)
    assert 0 < run.diagnostics.column('perturbation')[0] <= 1.01e-2

    static = evolve(exterior_profile, None, 0.0, controls)
    assert static.diagnostics.column('perturbation')[0] == 0


@pytest.mark.slow
def test_unnormalized_mode_is_refused(exterior_profile):
    mode = build_zero_mode(exterior_profile, mpf('0.5')).scaled(3)
    with pytest.raises(DomainError):
        evolve(exterior_profile, mode, 1e-2)
