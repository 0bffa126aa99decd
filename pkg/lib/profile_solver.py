"""
Self-similar profiles (σ(Z), ω(Z)) by Chebyshev collocation on two intervals
and the truncated tail beyond Zp2.

I1 = [0, Zp1] carries the interior trajectory P6 -> P2 in the variable
S = Zσ = δ + s_2 Z^2 + σ̃ Z^4, which removes the 1/Z singularity of σ at the
origin. I2 = [Zp1, Zp2] carries the exterior trajectory P2 <- P4 labelled by κ;
its scaling η is an unknown fixed by the sonic point sitting at Zp1. δ is pinned
by moving Zp1, so Z2 = Zp1 is an output of the solve.
"""
# standard library
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple
import logging
import math

# third-party libraries
import numpy as np
from mpmath import mp, mpf
from scipy.integrate import solve_ivp

# local
from lib.arith import to_mpf, mpf_zeros, max_abs, solve
from lib.errors import (ConvergenceError, DomainError, IntegerNuError, InvalidArtifact, NewtonDiverged,
                        SingularJacobian, SonicCrossing, WindowExit)
from lib.file import encode_array, decode_array, encode_real, decode_real
from lib.phase_core import (SCHEMA_VERSION, EulerParams, PhasePoint, SonicData, check_schema,
                            field_components, field_partials, sonic_data)
from lib.series import (Location, SeriesExpansion, series_at_infinity, series_at_origin,
                        series_at_sonic, series_in_z)
from lib.spectral import CollocationGrid, build_grids


logger = logging.getLogger(__name__)

SHOOT_ORIGIN_Z = 0.05
SHOOT_TAIL_Z = 1e3
SONIC_STOP = 1e-3
P2_CAPTURE = 0.05



def default_tolerance(dps: Optional[int] = None) -> mpf:
    dps = mp.dps if dps is None else dps
    return mpf(10)**(-max(dps - 20, int(0.6*dps)))


@dataclass
class SolverOptions:
    N1: int = 96
    N2: int = 96
    tol: Optional[mpf] = None
    max_iter: int = 50
    Zp2_factor: mpf = mpf(20)
    clustering: mpf = mpf(3)
    k_cut: int = 10
    n_terms: int = 12
    delta: mpf = mpf(1)
    interior_only: bool = False

    @property
    def tolerance(self) -> mpf:
        return default_tolerance() if self.tol is None else to_mpf(self.tol)


@dataclass
class NewtonReport:
    iterations: int
    residual: mpf
    dps: int

    def to_dict(self) -> Dict:
        return {'iterations': self.iterations, 'residual': encode_real(self.residual), 'dps': self.dps}

    @classmethod
    def from_dict(cls, data: Dict) -> 'NewtonReport':
        return cls(int(data['iterations']), decode_real(data['residual']), int(data['dps']))



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                     NEWTON                      #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def newton_solve(operator: Callable, u0: np.ndarray, tol, max_iter: int = 50,
                 label: str = '') -> Tuple[np.ndarray, NewtonReport]:
    """
    Damped Newton iteration for operator(u, jacobian) -> (F, J).
    The step is halved while the max-norm residual does not decrease.
    """
    tol = to_mpf(tol)
    u = u0.copy()
    F, J = operator(u, True)
    res = max_abs(F)
    res0 = res
    for it in range(max_iter + 1):
        logger.debug(f'{label} newton iteration {it}: residual {mp.nstr(res, 5)}')
        if res < tol:
            return u, NewtonReport(it, res, mp.dps)
        if it == max_iter:
            break

        du = solve(J, -F)
        lam = mpf(1)
        while True:
            u_try = u + lam*du
            F_try, _ = operator(u_try, False)
            res_try = max_abs(F_try)
            if res_try < res or lam < mpf(1)/64:
                break
            lam /= 2
        u = u_try
        F, J = operator(u, True)
        res = max_abs(F)
        if not mp.isfinite(res) or res > 1e6*(1 + res0):
            raise NewtonDiverged(f'{label}: residual grew to {mp.nstr(res, 5)}', residual=res, iterations=it + 1)

    raise NewtonDiverged(f'{label}: no convergence in {max_iter} iterations, residual {mp.nstr(res, 5)}',
                         residual=res, iterations=max_iter)



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#               DISCRETE SYSTEMS                  #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def _A_and_prime(W, params: EulerParams):
    d, ell, r = params.d, params.ell, params.r
    A = (ell + d - 1)*W**2 - (ell + d + (ell - 1)*r)*W + ell*r
    Aw = 2*(ell + d - 1)*W - (ell + d + (ell - 1)*r)
    return A, Aw


def interior_fields(grid: CollocationGrid, delta, sigma_tilde: np.ndarray, omega: np.ndarray,
                    s2_unit) -> Dict[str, np.ndarray]:
    """S, Z dS/dZ, ω and Z dω/dZ on the I1 nodes"""
    Z = grid.nodes_Z
    D = grid.D()
    Z2 = Z*Z
    Z4 = Z2*Z2
    s2 = s2_unit/delta
    S = delta + s2*Z2 + sigma_tilde*Z4
    ZS = 2*s2*Z2 + 4*sigma_tilde*Z4 + Z4*Z*D.dot(sigma_tilde)
    ZW = Z*D.dot(omega)
    return {'Z': Z, 'S': S, 'ZS': ZS, 'W': omega, 'ZW': ZW}


def _interior_system(u: np.ndarray, grid: CollocationGrid, params: EulerParams, sonic: SonicData,
                     s2_unit, s4_unit, jacobian: bool = True):
    d, ell, r = params.d, params.ell, params.r
    N = grid.N
    n = 2*N + 3
    delta = u[0]
    st = u[1:N + 2]
    W = u[N + 2:]

    f = interior_fields(grid, delta, st, W, s2_unit)
    Z, S, ZS, ZW = f['Z'], f['S'], f['ZS'], f['ZW']
    Z2 = Z*Z
    Z4 = Z2*Z2
    Zp1 = grid.Zp1
    Wm1 = W - 1
    A, Aw = _A_and_prime(W, params)

    Z2Delta = Z2*Wm1**2 - S**2
    E1 = Z2Delta*ZW + Z2*W*Wm1*(W - r) - d*(W - params.omega0)*S**2
    E2 = Z2Delta*(ZS - S) + (S/ell)*(Z2*A - ell*S**2)

    F = mpf_zeros(n)
    F[0:N - 1] = E1[1:N]
    F[N - 1:2*N - 2] = E2[1:N]
    F[2*N - 2] = W[N] - params.omega0
    F[2*N - 1] = st[N] - s4_unit/delta**3
    F[2*N] = W[0] - sonic.omega2
    F[2*N + 1] = S[0]/Zp1 - sonic.sigma2
    F[2*N + 2] = (ZS[0] - S[0])/Zp1 - sonic.s1
    if not jacobian:
        return F, None

    D = grid.D()
    Z5 = Z4*Z
    dS_ddelta = 1 - s2_unit*Z2/delta**2
    dZS_ddelta = -2*s2_unit*Z2/delta**2

    E1_W = 2*Z2*Wm1*ZW + Z2*(3*W**2 - 2*(1 + r)*W + r) - d*S**2
    E1_ZW = Z2Delta
    E1_S = -2*S*ZW - 2*d*(W - params.omega0)*S
    E2_W = 2*Z2*Wm1*(ZS - S) + (S/ell)*Z2*Aw
    E2_ZS = Z2Delta
    E2_S = -2*S*(ZS - S) - Z2Delta + Z2*A/ell - 3*S**2

    dE1_dW = np.diag(E1_W) + (E1_ZW*Z)[:, None]*D
    dE1_dst = np.diag(E1_S*Z4)
    dE1_ddelta = E1_S*dS_ddelta
    dE2_dW = np.diag(E2_W)
    dE2_dst = np.diag(E2_S*Z4 + 4*E2_ZS*Z4) + (E2_ZS*Z5)[:, None]*D
    dE2_ddelta = E2_S*dS_ddelta + E2_ZS*dZS_ddelta

    J = mpf_zeros((n, n))
    J[0:N - 1, 0] = dE1_ddelta[1:N]
    J[0:N - 1, 1:N + 2] = dE1_dst[1:N, :]
    J[0:N - 1, N + 2:] = dE1_dW[1:N, :]
    J[N - 1:2*N - 2, 0] = dE2_ddelta[1:N]
    J[N - 1:2*N - 2, 1:N + 2] = dE2_dst[1:N, :]
    J[N - 1:2*N - 2, N + 2:] = dE2_dW[1:N, :]

    J[2*N - 2, N + 2 + N] = 1
    J[2*N - 1, 1 + N] = 1
    J[2*N - 1, 0] = 3*s4_unit/delta**4
    J[2*N, N + 2] = 1
    J[2*N + 1, 0] = dS_ddelta[0]/Zp1
    J[2*N + 1, 1] = Z4[0]/Zp1
    J[2*N + 2, 0] = (dZS_ddelta[0] - dS_ddelta[0])/Zp1
    J[2*N + 2, 1:N + 2] = Z5[0]*D[0, :]/Zp1
    J[2*N + 2, 1] += 3*Z4[0]/Zp1
    return F, J


def _tail_value_and_eta_derivative(tail_unit: SeriesExpansion, Z, eta):
    """σ, ω of the tail at Z and their η-derivatives, from the unit-η coefficients"""
    y = to_mpf(Z)**(-tail_unit.r)
    vals, ders = [], []
    for coeffs in (tail_unit.sigma_tower, tail_unit.omega_tower):
        vals.append(sum((c*(eta*y)**k for k, c in enumerate(coeffs)), mpf(0)))
        ders.append(sum((k*c*eta**(k - 1)*y**k for k, c in enumerate(coeffs) if k > 0), mpf(0)))
    return vals[0], vals[1], ders[0], ders[1]


def exterior_fields(grid: CollocationGrid, sigma: np.ndarray, omega: np.ndarray) -> Dict[str, np.ndarray]:
    Z = grid.nodes_Z
    D = grid.D()
    return {'Z': Z, 'sigma': sigma, 'omega': omega, 'Zs': Z*D.dot(sigma), 'Zw': Z*D.dot(omega)}


def _exterior_system(v: np.ndarray, grid: CollocationGrid, params: EulerParams, sonic: SonicData,
                     tail_unit: SeriesExpansion, jacobian: bool = True):
    N = grid.N
    n = 2*N + 3
    sigma = v[0:N + 1]
    W = v[N + 1:2*N + 2]
    eta = v[2*N + 2]

    f = exterior_fields(grid, sigma, W)
    Z, Zs, Zw = f['Z'], f['Zs'], f['Zw']
    Delta, Delta1, Delta2 = field_components(sigma, W, params)
    R1 = Delta*Zw + Delta1
    R2 = Delta*Zs + Delta2
    ts, tw, dts, dtw = _tail_value_and_eta_derivative(tail_unit, grid.Zp2, eta)
    D = grid.D()

    F = mpf_zeros(n)
    F[0:N - 1] = R1[1:N]
    F[N - 1:2*N - 2] = R2[1:N]
    F[2*N - 2] = sigma[0] - ts
    F[2*N - 1] = W[0] - tw
    F[2*N] = sigma[N] - sonic.sigma2
    F[2*N + 1] = W[N] - sonic.omega2
    F[2*N + 2] = grid.Zp1*D[N, :].dot(sigma) - sonic.s1
    if not jacobian:
        return F, None

    p = field_partials(sigma, W, params)
    dR1_dW = np.diag(p['Delta_w']*Zw + p['Delta1_w']) + (Delta*Z)[:, None]*D
    dR1_ds = np.diag(p['Delta_s']*Zw + p['Delta1_s'])
    dR2_dW = np.diag(p['Delta_w']*Zs + p['Delta2_w'])
    dR2_ds = np.diag(p['Delta_s']*Zs + p['Delta2_s']) + (Delta*Z)[:, None]*D

    J = mpf_zeros((n, n))
    J[0:N - 1, 0:N + 1] = dR1_ds[1:N, :]
    J[0:N - 1, N + 1:2*N + 2] = dR1_dW[1:N, :]
    J[N - 1:2*N - 2, 0:N + 1] = dR2_ds[1:N, :]
    J[N - 1:2*N - 2, N + 1:2*N + 2] = dR2_dW[1:N, :]
    J[2*N - 2, 0] = 1
    J[2*N - 2, 2*N + 2] = -dts
    J[2*N - 1, N + 1] = 1
    J[2*N - 1, 2*N + 2] = -dtw
    J[2*N, N] = 1
    J[2*N + 1, 2*N + 1] = 1
    J[2*N + 2, 0:N + 1] = grid.Zp1*D[N, :]
    return F, J


def _check_sonic_sign(Delta_like: np.ndarray, expect_negative: bool, grid: CollocationGrid):
    for n in range(1, grid.N):
        if (Delta_like[n] >= 0) == expect_negative:
            raise SonicCrossing(f'sonic line crossed inside I{grid.interval_id} near Z = {mp.nstr(grid.nodes_Z[n], 8)}',
                                Z=float(grid.nodes_Z[n]))



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                    SEEDS                        #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class ProfileSeed:
    """Nodal values the Newton solves start from; exterior parts are optional"""
    Zp1: mpf
    delta: mpf
    sigma_tilde: np.ndarray
    omega1: np.ndarray
    sigma_ext: Optional[np.ndarray] = None
    omega_ext: Optional[np.ndarray] = None
    eta: Optional[mpf] = None


def _float_params(params: EulerParams) -> EulerParams:
    return EulerParams(params.d, float(params.ell), float(params.r),
                       None if params.kappa is None else float(params.kappa), float(params.eta))


def _log_rhs(fparams: EulerParams):
    def rhs(x, y):
        Delta, Delta1, Delta2 = field_components(y[0], y[1], fparams)
        return [-Delta2/Delta, -Delta1/Delta]
    return rhs


def _sonic_event(fparams: EulerParams):
    def event(x, y):
        Delta, _, _ = field_components(y[0], y[1], fparams)
        return abs(Delta) - SONIC_STOP
    event.terminal = True
    return event


@dataclass
class ShootingResult:
    """One trajectory in x = ln Z stopped next to the sonic line; unit δ or unit η"""
    reached_P2: bool
    Z_stop: float
    Z2: float
    solution: object


def _z2_from_stop(Z_stop: float, Delta_stop: float, sonic: SonicData) -> float:
    xi = Delta_stop/(-2*float(sonic.sigma2)*float(sonic.s1 + sonic.w1))
    return Z_stop/(1 + xi)


def shoot_interior(params: EulerParams, sonic: Optional[SonicData] = None, n_terms: int = 12) -> ShootingResult:
    sonic = sonic or sonic_data(params)
    origin = series_at_origin(params, n_terms, delta=1)
    start = origin.at(SHOOT_ORIGIN_Z)
    fparams = _float_params(params)
    sol = solve_ivp(_log_rhs(fparams), (math.log(SHOOT_ORIGIN_Z), math.log(1e6)),
                    [float(start.sigma), float(start.omega)], method='DOP853',
                    rtol=1e-11, atol=1e-13, dense_output=True, events=_sonic_event(fparams))
    return _shooting_outcome(sol, fparams, sonic)


def shoot_exterior(params: EulerParams, kappa=None, sonic: Optional[SonicData] = None, k_cut: int = 10) -> ShootingResult:
    kappa = params.kappa if kappa is None else to_mpf(kappa)
    sonic = sonic or sonic_data(params)
    tail = series_at_infinity(params.with_(kappa=kappa, eta=1), k_cut)
    start = tail.at(SHOOT_TAIL_Z)
    fparams = _float_params(params)
    sol = solve_ivp(_log_rhs(fparams), (math.log(SHOOT_TAIL_Z), math.log(1e-8)),
                    [float(start.sigma), float(start.omega)], method='DOP853',
                    rtol=1e-11, atol=1e-13, dense_output=True, events=_sonic_event(fparams))
    return _shooting_outcome(sol, fparams, sonic)


def _shooting_outcome(sol, fparams: EulerParams, sonic: SonicData) -> ShootingResult:
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        return ShootingResult(False, float('nan'), float('nan'), sol)
    x_stop = sol.t_events[0][0]
    sigma, omega = sol.y_events[0][0]
    reached = abs(sigma - float(sonic.sigma2)) + abs(omega - float(sonic.omega2)) < P2_CAPTURE
    Delta, _, _ = field_components(sigma, omega, fparams)
    Z_stop = math.exp(x_stop)
    return ShootingResult(reached, Z_stop, _z2_from_stop(Z_stop, Delta, sonic), sol)


def _sonic_z_series(params: EulerParams, sonic: SonicData, n_terms: int):
    try:
        return series_in_z(series_at_sonic(params, Location.SONIC_LEFT, n_terms, sonic=sonic), params)
    except IntegerNuError:
        return [sonic.sigma2, sonic.s1], [sonic.omega2, sonic.w1]


def _sonic_near_factory(params: EulerParams, sonic: SonicData, options: SolverOptions):
    """Evaluator of the sonic series in ξ = Zb/Z2b - 1 for a unit trajectory with sonic radius Z2b"""
    s_z, w_z = _sonic_z_series(params, sonic, min(options.n_terms, 6))

    def sonic_near(Z2b):
        def f(Zb):
            xi = to_mpf(Zb)/to_mpf(Z2b) - 1
            return (sum((c*xi**k for k, c in enumerate(s_z)), mpf(0)),
                    sum((c*xi**k for k, c in enumerate(w_z)), mpf(0)))
        return f
    return sonic_near


def _base_point(Zb: float, shot: ShootingResult, near: Callable, far: Callable, inner: bool):
    """(σ, ω) of a unit trajectory at Zb: ODE between the end regions, series outside"""
    if inner and Zb >= shot.Z_stop or not inner and Zb <= shot.Z_stop:
        return near(Zb)
    x = math.log(Zb)
    if shot.solution.sol is not None and min(shot.solution.t) <= x <= max(shot.solution.t):
        s, w = shot.solution.sol(x)
        return to_mpf(float(s)), to_mpf(float(w))
    return far(Zb)


def seed_from_shooting(params: EulerParams, I1: CollocationGrid, I2: Optional[CollocationGrid] = None,
                       options: Optional[SolverOptions] = None) -> ProfileSeed:
    """
    Unit trajectories from the origin (δ = 1) and from the tail (η = 1), each
    rescaled by the scaling symmetry so that its sonic point lands on Zp1. The
    Z-parameterized sonic series covers the last stretch before Z2.
    """
    options = options or SolverOptions()
    sonic = sonic_data(params)
    origin = series_at_origin(params, options.n_terms, delta=1)
    sonic_near = _sonic_near_factory(params, sonic, options)

    inner = shoot_interior(params, sonic, options.n_terms)
    if not inner.reached_P2:
        raise SonicCrossing('interior trajectory from the origin does not reach P2')
    lam = I1.Zp1/to_mpf(inner.Z2)

    def origin_far(Zb):
        p = origin.at(Zb)
        return p.sigma, p.omega

    S_unit = origin.sigma_tower
    sigma_tilde = mpf_zeros(I1.N + 1)
    omega1 = mpf_zeros(I1.N + 1)
    for n, Z in enumerate(I1.nodes_Z):
        Zb = Z/lam
        if Zb <= SHOOT_ORIGIN_Z:
            st_b = sum((c*Zb**(k - 4) for k, c in enumerate(S_unit) if k >= 4), mpf(0))
            w_b = origin.at(Zb).omega if Zb > 0 else params.omega0
        else:
            s_b, w_b = _base_point(float(Zb), inner, sonic_near(inner.Z2), origin_far, inner=True)
            st_b = (Zb*s_b - 1 - S_unit[2]*Zb**2)/Zb**4
        sigma_tilde[n] = st_b/lam**3
        omega1[n] = w_b
    omega1[0] = sonic.omega2
    seed = ProfileSeed(I1.Zp1, lam, sigma_tilde, omega1)

    if I2 is not None and params.kappa is not None:
        seed.sigma_ext, seed.omega_ext, seed.eta = _exterior_seed(params, I2, sonic, sonic_near, options)
    return seed


def _exterior_seed(params, I2, sonic, sonic_near, options):
    outer = shoot_exterior(params, sonic=sonic, k_cut=options.k_cut)
    if not outer.reached_P2:
        raise SonicCrossing(f'exterior trajectory with kappa = {mp.nstr(params.kappa, 10)} misses P2')
    lam = I2.Zp1/to_mpf(outer.Z2)
    tail = series_at_infinity(params.with_(eta=1), options.k_cut)

    def tail_far(Zb):
        p = tail.at(Zb)
        return p.sigma, p.omega

    sigma_ext = mpf_zeros(I2.N + 1)
    omega_ext = mpf_zeros(I2.N + 1)
    for n, Z in enumerate(I2.nodes_Z):
        Zb = Z/lam
        s_b, w_b = _base_point(float(Zb), outer, sonic_near(outer.Z2), tail_far, inner=False)
        sigma_ext[n], omega_ext[n] = s_b, w_b
    sigma_ext[I2.N], omega_ext[I2.N] = sonic.sigma2, sonic.omega2
    return sigma_ext, omega_ext, lam**params.r



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                    SOLVES                       #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def solve_interior(params: EulerParams, grid: CollocationGrid, seed: ProfileSeed,
                   options: Optional[SolverOptions] = None):
    """Newton on I1 alone; returns (δ, σ̃, ω, NewtonReport)"""
    options = options or SolverOptions()
    sonic = sonic_data(params)
    origin = series_at_origin(params, max(options.n_terms, 6), delta=1)
    s2_unit, s4_unit = origin.sigma_tower[2], origin.sigma_tower[4]
    N = grid.N

    u0 = mpf_zeros(2*N + 3)
    u0[0] = seed.delta
    u0[1:N + 2] = seed.sigma_tilde
    u0[N + 2:] = seed.omega1
    op = lambda u, jac: _interior_system(u, grid, params, sonic, s2_unit, s4_unit, jac)
    u, report = newton_solve(op, u0, options.tolerance, options.max_iter, label='interior')

    delta, st, W = u[0], u[1:N + 2], u[N + 2:]
    f = interior_fields(grid, delta, st, W, s2_unit)
    _check_sonic_sign(grid.nodes_Z**2*(W - 1)**2 - f['S']**2, True, grid)
    logger.info(f'interior converged in {report.iterations} iterations, delta = {mp.nstr(delta, 12)}')
    return delta, st, W, report


def solve_exterior(params: EulerParams, grid: CollocationGrid, seed: ProfileSeed,
                   options: Optional[SolverOptions] = None):
    """Newton on I2 alone for fixed κ; returns (σ, ω, η, NewtonReport)"""
    options = options or SolverOptions()
    if params.kappa is None:
        raise DomainError('kappa has to be set to solve the exterior')
    sonic = sonic_data(params)
    tail_unit = series_at_infinity(params.with_(eta=1), options.k_cut)
    N = grid.N

    v0 = mpf_zeros(2*N + 3)
    v0[0:N + 1] = seed.sigma_ext
    v0[N + 1:2*N + 2] = seed.omega_ext
    v0[2*N + 2] = seed.eta
    op = lambda v, jac: _exterior_system(v, grid, params, sonic, tail_unit, jac)
    v, report = newton_solve(op, v0, options.tolerance, options.max_iter, label='exterior')

    sigma, W, eta = v[0:N + 1], v[N + 1:2*N + 2], v[2*N + 2]
    Delta, _, _ = field_components(sigma, W, params)
    _check_sonic_sign(Delta, False, grid)
    if eta <= 0:
        raise SonicCrossing(f'exterior converged to a non-decaying tail, eta = {mp.nstr(eta, 8)}')
    logger.info(f'exterior converged in {report.iterations} iterations, eta = {mp.nstr(eta, 12)}')
    return sigma, W, eta, report



@dataclass
class ProfileSolution:
    """
    Converged profile. On I1 the nodal unknowns are σ̃ (see the module
    docstring) and ω; on I2 they are σ and ω. The exterior parts are None for
    interior-only solves.
    """
    params: EulerParams
    delta: mpf
    Z2: mpf
    grid1: CollocationGrid
    sigma_tilde: np.ndarray
    omega1: np.ndarray
    s2_unit: mpf
    s4_unit: mpf
    newton_report: Dict[str, NewtonReport]
    grid2: Optional[CollocationGrid] = None
    sigma_ext: Optional[np.ndarray] = None
    omega_ext: Optional[np.ndarray] = None
    tail: Optional[SeriesExpansion] = None
    smoothness: Optional[Dict] = None

    @property
    def has_exterior(self) -> bool:
        return self.sigma_ext is not None

    @property
    def Zp2(self) -> mpf:
        return self.grid2.Zp2 if self.grid2 is not None else self.Z2

    def interior_fields(self) -> Dict[str, np.ndarray]:
        return interior_fields(self.grid1, self.delta, self.sigma_tilde, self.omega1, self.s2_unit)

    def exterior_fields(self) -> Dict[str, np.ndarray]:
        if not self.has_exterior:
            raise DomainError('profile has no exterior solution')
        return exterior_fields(self.grid2, self.sigma_ext, self.omega_ext)

    def to_dict(self) -> Dict:
        out = {
            'schema_version': SCHEMA_VERSION,
            'params': self.params.to_dict(),
            'delta': encode_real(self.delta),
            'Z2': encode_real(self.Z2),
            'grid1': self.grid1.to_dict(),
            'sigma_tilde': encode_array(self.sigma_tilde),
            'omega1': encode_array(self.omega1),
            's2_unit': encode_real(self.s2_unit),
            's4_unit': encode_real(self.s4_unit),
            'newton_report': {k: v.to_dict() for k, v in self.newton_report.items()},
            'grid2': None if self.grid2 is None else self.grid2.to_dict(),
            'sigma_ext': None if self.sigma_ext is None else encode_array(self.sigma_ext),
            'omega_ext': None if self.omega_ext is None else encode_array(self.omega_ext),
            'tail': None if self.tail is None else self.tail.to_dict(),
            'smoothness': self.smoothness,
        }
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> 'ProfileSolution':
        check_schema(data, 'profile')
        opt = lambda key, f: None if data.get(key) is None else f(data[key])
        try:
            sol = cls(EulerParams.from_dict(data['params']), decode_real(data['delta']), decode_real(data['Z2']),
                      CollocationGrid.from_dict(data['grid1']), decode_array(data['sigma_tilde']),
                      decode_array(data['omega1']), decode_real(data['s2_unit']), decode_real(data['s4_unit']),
                      {k: NewtonReport.from_dict(v) for k, v in data['newton_report'].items()},
                      opt('grid2', CollocationGrid.from_dict), opt('sigma_ext', decode_array),
                      opt('omega_ext', decode_array), opt('tail', SeriesExpansion.from_dict),
                      data.get('smoothness'))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArtifact(f'profile: malformed payload ({e})') from e
        sol.validate()
        return sol

    def validate(self):
        """Shapes, positivity and the sonic conditions at Z2 up to the recorded Newton residual"""
        def fail(message):
            raise InvalidArtifact(f'profile: {message}')

        N1 = self.grid1.N
        if len(self.sigma_tilde) != N1 + 1 or len(self.omega1) != N1 + 1:
            fail(f'interior arrays do not match N1 = {N1}')
        if self.delta <= 0:
            fail(f'delta = {mp.nstr(self.delta, 8)} is not positive')
        if not self.newton_report:
            fail('no Newton report')
        residual = max(rep.residual for rep in self.newton_report.values())
        bound = max(100*residual, mpf(10)**(5 - mp.dps))
        if abs(self.Z2 - self.grid1.right) > bound*max(1, abs(self.Z2)):
            fail('Z2 is not the right end of I1')
        sonic = sonic_data(self.params)
        if abs(self.omega1[0] - sonic.omega2) > bound:
            fail('interior omega misses omega2 at Z2')
        if not self.has_exterior:
            return
        N2 = self.grid2.N
        if len(self.sigma_ext) != N2 + 1 or len(self.omega_ext) != N2 + 1:
            fail(f'exterior arrays do not match N2 = {N2}')
        if self.params.kappa is None or self.params.eta is None or self.params.eta <= 0:
            fail('exterior without kappa or with a non-positive eta')
        if abs(self.sigma_ext[N2] - sonic.sigma2) > bound or abs(self.omega_ext[N2] - sonic.omega2) > bound:
            fail('exterior misses P2 at Z2')


def _rescaled_seed(sol: ProfileSolution, mu) -> ProfileSeed:
    """
    Exact image of a solution under Z -> μZ on grids scaled the same way:
    nodal ω and σ are unchanged, σ̃ scales as μ^-3, δ as μ and η as μ^r.
    """
    mu = to_mpf(mu)
    seed = ProfileSeed(sol.Z2*mu, sol.delta*mu, sol.sigma_tilde/mu**3, sol.omega1.copy())
    if sol.has_exterior:
        seed.sigma_ext = sol.sigma_ext.copy()
        seed.omega_ext = sol.omega_ext.copy()
        seed.eta = sol.params.eta*mu**sol.params.r
    return seed


def solve_profile(params: EulerParams, seed: Optional[ProfileSeed] = None,
                  options: Optional[SolverOptions] = None) -> ProfileSolution:
    """
    Interior first (it does not depend on κ), then δ is pinned by moving Zp1
    along the scaling symmetry, then the exterior for the given κ.
    """
    options = options or SolverOptions()
    sonic = sonic_data(params)
    origin = series_at_origin(params, max(options.n_terms, 6), delta=1)
    delta_target = to_mpf(options.delta)

    if seed is None:
        shot = shoot_interior(params, sonic, options.n_terms)
        if not shot.reached_P2:
            raise SonicCrossing('interior trajectory from the origin does not reach P2')
        Zp1 = delta_target*to_mpf(shot.Z2)
        I1, I2 = build_grids(Zp1, Zp1*options.Zp2_factor, options.N1, options.N2, options.clustering)
        seed = seed_from_shooting(params, I1, None, options)
    else:
        I1, _ = build_grids(seed.Zp1, seed.Zp1*options.Zp2_factor, options.N1, options.N2, options.clustering)

    delta, st, W, report = solve_interior(params, I1, seed, options)
    mu = delta_target/delta
    Zp1 = I1.Zp1*mu
    if abs(mu - 1) > options.tolerance:
        # the scaling symmetry maps the converged nodes onto the pinned grid exactly
        I1, I2 = build_grids(Zp1, Zp1*options.Zp2_factor, options.N1, options.N2, options.clustering)
        pinned = ProfileSeed(Zp1, delta_target, st/mu**3, W)
        delta, st, W, report = solve_interior(params, I1, pinned, options)

    sol = ProfileSolution(params, delta, I1.Zp1, I1, st, W, origin.sigma_tower[2], origin.sigma_tower[4],
                          {'interior': report})
    if options.interior_only or params.kappa is None:
        return sol

    _, I2 = build_grids(I1.Zp1, I1.Zp1*options.Zp2_factor, options.N1, options.N2, options.clustering)
    if seed.sigma_ext is not None and seed.omega_ext is not None:
        ext_seed = replace(seed, Zp1=I1.Zp1, eta=seed.eta*(I1.Zp1/seed.Zp1)**params.r)
    else:
        ext_seed = ProfileSeed(I1.Zp1, delta, st, W)
        ext_seed.sigma_ext, ext_seed.omega_ext, ext_seed.eta = _exterior_seed(
            params, I2, sonic, _sonic_near_factory(params, sonic, options), options)
    sigma, Wx, eta, report_x = solve_exterior(params, I2, ext_seed, options)

    sol.params = params.with_(eta=eta)
    sol.grid2, sol.sigma_ext, sol.omega_ext = I2, sigma, Wx
    sol.tail = series_at_infinity(sol.params, options.k_cut)
    sol.newton_report['exterior'] = report_x
    return sol





# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#              EVALUATION & TRANSFORMS            #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def interpolate(sol: ProfileSolution, Z) -> PhasePoint:
    """Barycentric on I1/I2, tail series beyond Zp2; P6 at Z = 0"""
    Z = to_mpf(Z)
    if Z < 0:
        raise DomainError(f'Z has to be non-negative, got {Z}')
    if Z == 0:
        return PhasePoint(mp.inf, sol.params.omega0)
    if Z <= sol.Z2:
        st = sol.grid1.interpolate(sol.sigma_tilde, Z)
        S = sol.delta + sol.s2_unit/sol.delta*Z**2 + st*Z**4
        return PhasePoint(S/Z, sol.grid1.interpolate(sol.omega1, Z))
    if not sol.has_exterior:
        raise DomainError('profile has no exterior solution')
    if Z <= sol.Zp2:
        return PhasePoint(sol.grid2.interpolate(sol.sigma_ext, Z), sol.grid2.interpolate(sol.omega_ext, Z))
    return sol.tail.at(Z)


def continuous_residual(sol: ProfileSolution, points: int = 100) -> mpf:
    """
    Max residual of the profile equations at points strictly between the
    collocation nodes (Z^2-multiplied form on I1, Δ-form on I2).
    """
    params = sol.params
    d, ell, r = params.d, params.ell, params.r
    offset = mp.sqrt(2) - 1
    worst = mpf(0)

    f = sol.interior_fields()
    g1 = sol.grid1
    for j in range(points):
        x = mp.cos(mp.pi*(j + offset)/points)
        Z = g1.to_Z(x)
        if Z <= 0 or Z >= g1.Zp1:
            continue
        S = g1.interpolate(f['S'], Z)
        ZS = g1.interpolate(f['ZS'], Z)
        W = g1.interpolate(f['W'], Z)
        ZW = g1.interpolate(f['ZW'], Z)
        Z2Delta = Z**2*(W - 1)**2 - S**2
        E1 = Z2Delta*ZW + Z**2*W*(W - 1)*(W - r) - d*(W - params.omega0)*S**2
        E2 = Z2Delta*(ZS - S) + (S/ell)*(Z**2*((ell + d - 1)*W**2 - (ell + d + (ell - 1)*r)*W + ell*r) - ell*S**2)
        worst = max(worst, abs(E1), abs(E2))

    if sol.has_exterior:
        f = sol.exterior_fields()
        g2 = sol.grid2
        for j in range(points):
            Z = g2.to_Z(mp.cos(mp.pi*(j + offset)/points))
            if Z <= g2.Zp1 or Z >= g2.Zp2:
                continue
            s, w = g2.interpolate(f['sigma'], Z), g2.interpolate(f['omega'], Z)
            zs, zw = g2.interpolate(f['Zs'], Z), g2.interpolate(f['Zw'], Z)
            Delta, Delta1, Delta2 = field_components(s, w, params)
            worst = max(worst, abs(Delta*zw + Delta1), abs(Delta*zs + Delta2))
    return worst


@dataclass
class PhysicalProfile:
    """ρ̂ = (√(ℓ/2) Z σ)^ℓ and û = -Zω with evaluators"""
    sol: ProfileSolution

    def rho(self, Z) -> mpf:
        Z = to_mpf(Z)
        ell = self.sol.params.ell
        if Z <= self.sol.Z2:
            st = self.sol.grid1.interpolate(self.sol.sigma_tilde, Z)
            S = self.sol.delta + self.sol.s2_unit/self.sol.delta*Z**2 + st*Z**4
        else:
            S = Z*interpolate(self.sol, Z).sigma
        return (mp.sqrt(ell/2)*S)**ell

    def u(self, Z) -> mpf:
        Z = to_mpf(Z)
        if Z == 0:
            return mpf(0)
        return -Z*interpolate(self.sol, Z).omega

    def interior_nodes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        f = self.sol.interior_fields()
        ell = self.sol.params.ell
        return f['Z'], (mp.sqrt(ell/2)*f['S'])**ell, -f['Z']*f['W']

    def exterior_nodes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        f = self.sol.exterior_fields()
        ell = self.sol.params.ell
        return f['Z'], (mp.sqrt(ell/2)*f['Z']*f['sigma'])**ell, -f['Z']*f['omega']


def emden_to_physical(sol: ProfileSolution) -> PhysicalProfile:
    return PhysicalProfile(sol)


def physical_to_emden(rho, u, Z, ell) -> PhasePoint:
    """Inverse transform at Z > 0"""
    Z, ell = to_mpf(Z), to_mpf(ell)
    return PhasePoint(mp.sqrt(2/ell)*to_mpf(rho)**(1/ell)/Z, -to_mpf(u)/Z)


def sample_uniform(sol: ProfileSolution, Zmax=None, n: int = 200) -> List[Tuple[mpf, mpf, mpf, mpf, mpf]]:
    """Rows (Z, σ, ω, ρ̂, û) at Z = Zmax·i/n, i = 1..n"""
    if Zmax is None:
        Zmax = 2*sol.Zp2 if sol.has_exterior else sol.Z2
    Zmax = to_mpf(Zmax)
    phys = emden_to_physical(sol)
    rows = []
    for i in range(1, n + 1):
        Z = Zmax*i/n
        p = interpolate(sol, Z)
        rows.append((Z, p.sigma, p.omega, phys.rho(Z), phys.u(Z)))
    return rows



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#           CONTINUATION & KAPPA WINDOW           #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def continue_in_parameter(sol: ProfileSolution, target: EulerParams, steps: int,
                          options: Optional[SolverOptions] = None) -> ProfileSolution:
    """
    Straight-line path in (r, κ) from sol.params to target, each converged
    solution seeding the next solve. Leaving the κ window surfaces as WindowExit.
    """
    if steps <= 0:
        return sol
    options = options or SolverOptions()
    start = sol.params
    kappa_moves = target.kappa is not None and start.kappa is not None and target.kappa != start.kappa
    current = sol
    for i in range(1, steps + 1):
        t = mpf(i)/steps
        r = start.r + t*(target.r - start.r)
        kappa = None if target.kappa is None else (
            target.kappa if start.kappa is None else start.kappa + t*(target.kappa - start.kappa))
        p = EulerParams(target.d, target.ell, r, kappa, current.params.eta)
        p.validate()
        try:
            current = solve_profile(p, _rescaled_seed(current, 1), options)
        except (SonicCrossing, NewtonDiverged, SingularJacobian) as e:
            if kappa_moves:
                raise WindowExit(f'kappa = {mp.nstr(kappa, 10)} left the admissible window: {e}', last_good=current)
            raise
        logger.info(f'continuation step {i}/{steps}: r = {mp.nstr(r, 10)}, kappa = {None if kappa is None else mp.nstr(kappa, 10)}')
    return current


def classify_kappa(params: EulerParams, kappa, k_cut: int = 10) -> bool:
    """True when the tail trajectory with this κ reaches P2"""
    try:
        return shoot_exterior(params, kappa, k_cut=k_cut).reached_P2
    except (ConvergenceError, ZeroDivisionError, OverflowError):
        return False


def admissible_kappa_window(params: EulerParams, kappa_lo=-2, kappa_hi=4, samples: int = 61,
                            xtol=1e-6, k_cut: int = 10) -> Tuple[mpf, mpf]:
    """
    Bracket of κ whose tail trajectories reach P2: coarse sampling, then
    bisection on both window edges. The run containing params.kappa wins when
    it is set, the longest run otherwise.
    """
    grid = np.linspace(float(kappa_lo), float(kappa_hi), samples)
    ok = [classify_kappa(params, k, k_cut) for k in grid]
    runs = []
    start = None
    for i, flag in enumerate(ok + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if not runs:
        raise WindowExit(f'no admissible kappa in [{kappa_lo}, {kappa_hi}]')

    chosen = max(runs, key=lambda ab: ab[1] - ab[0])
    if params.kappa is not None:
        for a, b in runs:
            if grid[a] <= float(params.kappa) <= grid[b]:
                chosen = (a, b)

    def edge(inside: float, outside: float) -> mpf:
        while abs(outside - inside) > xtol:
            mid = (inside + outside)/2
            if classify_kappa(params, mid, k_cut):
                inside = mid
            else:
                outside = mid
        return to_mpf(inside)

    a, b = chosen
    lo = edge(grid[a], grid[a - 1]) if a > 0 else to_mpf(grid[a])
    hi = edge(grid[b], grid[b + 1]) if b < samples - 1 else to_mpf(grid[b])
    logger.info(f'admissible kappa window ({mp.nstr(lo, 8)}, {mp.nstr(hi, 8)})')
    return lo, hi
