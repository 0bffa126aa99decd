"""
Tiered self-checks.

  0  phase-plane identities over random admissible parameters, series residuals
  1  convergence of a stock profile and its analytic scaling/gauge modes
  2  the smooth solution, κ and least stable mode of (d, ℓ) = (3, 2)
  3  shock formation from the (3, 2, 1.33, 0.6) profile and its Ω = 1/2 0-mode

Each check yields a row (tier, check, value, bound, passed).
"""
# standard library
from dataclasses import replace
from typing import List, Optional, Tuple
import logging
import random

# third-party libraries
from mpmath import mp, mpf

# local
from lib.errors import MissingGaugeMode, ValidationError
from lib.evolution import EvolutionControls, evolve
from lib.mode_solver import (analytic_modes, build_zero_mode, find_smooth_mode_exponents, mode_residual,
                             normalize_for_evolution, omega_bounds, regularity_N)
from lib.phase_core import (EulerParams, admissible_window, s1_plus_w1_closed_form, sonic_data, t2_identity)
from lib.profile_solver import SolverOptions, continuous_residual, solve_profile
from lib.series import series_at_origin, series_residual
from lib.shock_fit import shock_fit
from lib.smooth_scan import find_r_n, find_kappa_star


logger = logging.getLogger(__name__)

Row = Tuple[int, str, str, str, bool]

STOCK = (3, 2, '1.2', '0.6')
SMOOTH_32 = {'r': mpf('1.143517'), 'r_tol': mpf('3e-6'), 'kappa': mpf('0.11056'), 'kappa_tol': mpf('5e-5'),
             'Omega1': mpf('0.80796'), 'Omega1_tol': mpf('5e-4'), 'theta': mpf('-1.74581'), 'theta_tol': mpf('5e-3')}
SHOCK = {'params': (3, 2, '1.33', '0.6'), 'Omega': mpf('0.5'), 'epsilon': 1e-2,
         'tau_star': 6.3, 'tau_star_tol': 0.5, 's': 1.0, 's_tol': 0.3}



def _row(tier: int, check: str, value, bound, passed: bool) -> Row:
    logger.info(f'tier {tier} {check}: {"ok" if passed else "FAILED"} ({value} vs {bound})')
    fmt = lambda x: mp.nstr(x, 8) if isinstance(x, mpf) else str(x)
    return (tier, check, fmt(value), fmt(bound), bool(passed))


def random_admissible(rng: random.Random, d_choices=(2, 3, 4, 5)) -> EulerParams:
    d = rng.choice(d_choices)
    ell = mpf(rng.uniform(0.5, 6))
    lo, hi = admissible_window(d, ell)
    r = lo + (hi - lo)*mpf(rng.uniform(0.02, 0.98))
    return EulerParams(d, ell, r)


def tier0(samples: int = 1000, seed: int = 0, bound=mpf('1e-20')) -> List[Row]:
    rng = random.Random(seed)
    worst = {'T2 - nu': mpf(0), 's1 + w1 closed form': mpf(0), 'N(0) - nu': mpf(0), 'N(Omega_max) - 1': mpf(0)}
    for _ in range(samples):
        params = random_admissible(rng)
        try:
            sonic = sonic_data(params)
        except ValidationError as e:
            logger.debug(f"skipped {params}: {e}")
            continue
        worst['T2 - nu'] = max(worst['T2 - nu'], abs(t2_identity(sonic, params) - sonic.nu))
        worst['s1 + w1 closed form'] = max(worst['s1 + w1 closed form'],
                                           abs(sonic.s1 + sonic.w1 - s1_plus_w1_closed_form(sonic, params)))
        worst['N(0) - nu'] = max(worst['N(0) - nu'], abs(regularity_N(params, 0, sonic) - sonic.nu))
        if sonic.nu > 1:
            Omega_max = omega_bounds(params, sonic)[1]
            worst['N(Omega_max) - 1'] = max(worst['N(Omega_max) - 1'],
                                            abs(regularity_N(params, Omega_max, sonic) - 1))
    rows = [_row(0, name, value, bound, value <= bound) for name, value in worst.items()]

    params = EulerParams.create(*STOCK[:3])
    origin = series_at_origin(params, 12)
    res = series_residual(origin, params, mpf('0.05'))
    res_half = series_residual(origin, params, mpf('0.025'))
    rows.append(_row(0, 'origin series residual halving', res_half, res, res_half < res))
    return rows


def tier1(options: Optional[SolverOptions] = None) -> List[Row]:
    """
    Newton residual of the stock profile, decay of its off-grid residual when
    N1, N2 double, and the analytic modes, whose nodal derivatives come from
    the profile equations and so only see the Newton residual.
    """
    options = options or SolverOptions()
    params = EulerParams.create(*STOCK)
    tol = options.tolerance
    sol = solve_profile(params, None, options)
    coarse = solve_profile(params, None, replace(options, N1=max(options.N1//2, 8), N2=max(options.N2//2, 8)))

    newton = max(rep.residual for rep in sol.newton_report.values())
    rows = [_row(1, 'profile Newton residual', newton, tol, newton < tol)]
    res, res_coarse = continuous_residual(sol), continuous_residual(coarse)
    logger.info(f'off-grid residual {mp.nstr(res_coarse, 3)} at N = {coarse.grid1.N}, '
                f'{mp.nstr(res, 3)} at N = {sol.grid1.N}')
    bound = max(res_coarse/10, 100*tol)
    rows.append(_row(1, 'profile off-grid residual under N doubling', res, bound, res <= bound))
    for mode in analytic_modes(sol):
        res = mode_residual(mode)
        rows.append(_row(1, f'{mode.params.classification.value} residual', res, 100*tol, res <= 100*tol))
    return rows


def tier2(options: Optional[SolverOptions] = None, workers: int = 1, seed: int = 0) -> List[Row]:
    options = options or SolverOptions()
    ref = SMOOTH_32
    scan = find_r_n(3, 2, (1, 3), options=options, workers=workers, seed=seed)
    near = [root.r for root in scan.roots if abs(root.r - ref['r']) < 100*ref['r_tol']]
    if not near:
        return [_row(2, 'r_2', 'missing', ref['r'], False)]
    r2 = near[0]
    rows = [_row(2, 'r_2', r2, ref['r'], abs(r2 - ref['r']) <= ref['r_tol'])]

    kappa = find_kappa_star(3, 2, r2, options=options, workers=workers, seed=seed)
    if kappa is None:
        return rows + [_row(2, 'kappa', 'missing', ref['kappa'], False)]
    rows.append(_row(2, 'kappa', kappa, ref['kappa'], abs(kappa - ref['kappa']) <= ref['kappa_tol']))

    sol = solve_profile(EulerParams.create(3, 2, r2, kappa), None, options)
    try:
        spectrum = find_smooth_mode_exponents(sol)
    except MissingGaugeMode as e:
        return rows + [_row(2, 'Omega_0 = r', e.Omega if e.Omega is not None else 'missing', sol.params.r, False)]
    rows.append(_row(2, 'Omega_0 = r', spectrum.modes[0].Omega, sol.params.r, True))
    below_gauge = [m for m in spectrum.modes if m.Omega < sol.params.r - mpf('0.01')]
    if not below_gauge:
        return rows + [_row(2, 'Omega_1', 'missing', ref['Omega1'], False)]
    mode = below_gauge[0]
    rows.append(_row(2, 'Omega_1', mode.Omega, ref['Omega1'], abs(mode.Omega - ref['Omega1']) <= ref['Omega1_tol']))
    theta_ok = mode.theta is not None and abs(mode.theta - ref['theta']) <= ref['theta_tol']
    rows.append(_row(2, 'theta', mode.theta, ref['theta'], theta_ok))
    return rows


def tier3(options: Optional[SolverOptions] = None, controls: Optional[EvolutionControls] = None) -> List[Row]:
    ref = SHOCK
    sol = solve_profile(EulerParams.create(*ref['params']), None, options or SolverOptions())
    mode = normalize_for_evolution(build_zero_mode(sol, ref['Omega']))
    run = evolve(sol, mode, ref['epsilon'], controls or EvolutionControls(n_points=2**14))
    fit = shock_fit(run.diagnostics, 'max_rho_Z')
    Z_shock = run.diagnostics.column('Z_max_rho_Z')[-1]
    return [
        _row(3, 'tau*', fit.tau_star, ref['tau_star'], abs(fit.tau_star - ref['tau_star']) <= ref['tau_star_tol']),
        _row(3, 's of max rho_Z', fit.s, ref['s'], abs(fit.s - ref['s']) <= ref['s_tol']),
        _row(3, 'shock beyond Z2', Z_shock, sol.Z2, Z_shock > float(sol.Z2)),
    ]


def verify(level: int, options: Optional[SolverOptions] = None, workers: int = 1, seed: int = 0,
           samples: int = 1000) -> List[Row]:
    rows = tier0(samples, seed)
    if level >= 1:
        rows += tier1(options)
    if level >= 2:
        rows += tier2(options, workers, seed)
    if level >= 3:
        rows += tier3(options)
    return rows
