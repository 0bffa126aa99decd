"""
Linear radial perturbations ρ̂0 + e^(Ωτ)α, û0 + e^(Ωτ)β of a converged profile.

The linearized equations are collocated on the profile's own grids in the raw
variables (α, β):

  R1 = (Ω + ℓ(r-1) + û0' + (d-1)û0/Z)α + (Z + û0)α' + ρ̂0β' + (ρ̂0' + (d-1)ρ̂0/Z)β
  R2 = (Ω + r - 1 + û0')β + (Z + û0)β' + (γ-1)ρ̂0^(γ-2)α' + (γ-1)(γ-2)ρ̂0^(γ-3)ρ̂0'α

Beyond Zp2 a decaying mode is B0(θ T1 + T2) with the two towers of
lib.series.mode_series_at_infinity.
"""
# standard library
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple
import logging

# third-party libraries
import numpy as np
from mpmath import mp, mpf
from scipy.optimize import brentq

# local
from lib.arith import to_mpf, mpf_zeros, solve, falling_factorial
from lib.errors import (ConvergenceError, DomainError, IllConditionedFit, InsufficientData, IntegerExponent,
                        InvalidArtifact, MissingGaugeMode, NonDecayingTail, PrecisionExhausted, ValidationError)
from lib.file import encode_array, decode_array, encode_real, decode_real
from lib.phase_core import (SCHEMA_VERSION, EulerParams, SonicData, check_schema, field_components,
                            field_partials, sonic_data)
from lib.profile_solver import ProfileSolution, emden_to_physical, interpolate
from lib.series import (Location, ModeTailSeries, mode_series_at_infinity, series_at_sonic, series_in_z,
                        DEFAULT_K_CUT)
from lib.smooth_scan import PLUS, MINUS, fit_at_sonic
from lib.spectral import CollocationGrid


logger = logging.getLogger(__name__)

EXPONENT_GUARD = 1e-3
THETA_RANGE = (1e-3, 1e3)



class ModeKind(str, Enum):
    ZERO = 'ZeroMode'
    ONE = 'OneMode'
    SMOOTH = 'SmoothMode'
    SCALING = 'AnalyticScaling'
    GAUGE = 'AnalyticGauge'


def regularity_N(params: EulerParams, Omega, sonic: Optional[SonicData] = None) -> mpf:
    """N(Ω) = ν + 2(ν+1)Ω/((ℓ+1)(r-1)-(d+1))"""
    sonic = sonic or sonic_data(params)
    return sonic.nu + 2*(sonic.nu + 1)*to_mpf(Omega)/params.L


def omega_bounds(params: EulerParams, sonic: Optional[SonicData] = None) -> Tuple[mpf, mpf]:
    sonic = sonic or sonic_data(params)
    Omega_max = -(params.L/2)*(sonic.nu - 1)/(sonic.nu + 1)
    Omega_min = (1 - params.r)*min(params.ell, mpf(1))
    if Omega_max <= 0:
        raise DomainError(f'Omega_max = {mp.nstr(Omega_max, 8)} is not positive')
    return Omega_min, Omega_max


@dataclass
class ModeParams:
    Omega: mpf
    N_regularity: mpf
    classification: ModeKind
    theta: Optional[mpf] = None

    def to_dict(self) -> Dict:
        return {
            'Omega': encode_real(self.Omega),
            'N_regularity': encode_real(self.N_regularity),
            'classification': self.classification.value,
            'theta': None if self.theta is None else encode_real(self.theta),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModeParams':
        return cls(decode_real(data['Omega']), decode_real(data['N_regularity']), ModeKind(data['classification']),
                   None if data.get('theta') is None else decode_real(data['theta']))


def _scale_optional(values: Optional[np.ndarray], factor):
    return None if values is None else values*factor


@dataclass
class ModeSolution:
    """
    Nodal α, β on the profile grids (I1 values are zero for 0-modes). `tail`
    holds the decaying towers of constructed modes; analytic modes are
    continued with the profile tail instead and carry their exact nodal
    derivatives in `derivatives`.
    """
    base: ProfileSolution
    params: ModeParams
    alpha1: np.ndarray
    beta1: np.ndarray
    alpha2: Optional[np.ndarray] = None
    beta2: Optional[np.ndarray] = None
    tail: Optional[ModeTailSeries] = None
    B0: mpf = mpf(1)
    scale: mpf = mpf(1)
    leading_exponent: Optional[mpf] = None
    coefficients: Dict[str, mpf] = field(default_factory=dict)
    derivatives: Optional[Dict[str, np.ndarray]] = None

    def scaled(self, factor) -> 'ModeSolution':
        factor = to_mpf(factor)
        derivatives = None
        if self.derivatives is not None:
            derivatives = {k: v*factor for k, v in self.derivatives.items()}
        return ModeSolution(self.base, self.params, self.alpha1*factor, self.beta1*factor,
                            _scale_optional(self.alpha2, factor), _scale_optional(self.beta2, factor),
                            self.tail, self.B0*factor, self.scale*factor, self.leading_exponent,
                            dict(self.coefficients), derivatives)

    def evaluate(self, Z) -> Tuple[mpf, mpf]:
        Z = to_mpf(Z)
        sol = self.base
        if Z <= sol.Z2:
            return sol.grid1.interpolate(self.alpha1, Z), sol.grid1.interpolate(self.beta1, Z)
        if self.alpha2 is None:
            raise DomainError('mode has no exterior part')
        if Z <= sol.Zp2:
            return sol.grid2.interpolate(self.alpha2, Z), sol.grid2.interpolate(self.beta2, Z)
        if self.tail is not None:
            return self.tail.evaluate(Z, self.params.theta or 0, self.B0)
        return _analytic_tail(sol, self.params.classification, Z, self.scale)

    def alpha_tilde(self, Z) -> mpf:
        """α̃ = Zσ α/ρ̂ of the sonic analysis"""
        p = interpolate(self.base, Z)
        return to_mpf(Z)*p.sigma*self.evaluate(Z)[0]/emden_to_physical(self.base).rho(Z)

    def to_dict(self, profile_digest: Optional[str] = None) -> Dict:
        """`profile_digest` names the stored profile the mode lives on"""
        return {
            'schema_version': SCHEMA_VERSION,
            'profile_digest': profile_digest,
            'mode': self.params.to_dict(),
            'alpha1': encode_array(self.alpha1),
            'beta1': encode_array(self.beta1),
            'alpha2': None if self.alpha2 is None else encode_array(self.alpha2),
            'beta2': None if self.beta2 is None else encode_array(self.beta2),
            'tail': None if self.tail is None else self.tail.to_dict(),
            'B0': encode_real(self.B0),
            'scale': encode_real(self.scale),
            'leading_exponent': None if self.leading_exponent is None else encode_real(self.leading_exponent),
            'coefficients': {k: encode_real(v) for k, v in self.coefficients.items()},
            'derivatives': None if self.derivatives is None else
                {k: encode_array(v) for k, v in self.derivatives.items()},
            'profile_params': self.base.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict, base: ProfileSolution) -> 'ModeSolution':
        check_schema(data, 'mode')
        opt = lambda key, f: None if data.get(key) is None else f(data[key])
        try:
            mode = cls(base, ModeParams.from_dict(data['mode']), decode_array(data['alpha1']),
                       decode_array(data['beta1']), opt('alpha2', decode_array), opt('beta2', decode_array),
                       opt('tail', ModeTailSeries.from_dict), decode_real(data['B0']), decode_real(data['scale']),
                       opt('leading_exponent', decode_real),
                       {k: decode_real(v) for k, v in data.get('coefficients', {}).items()},
                       opt('derivatives', lambda ds: {k: decode_array(v) for k, v in ds.items()}))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArtifact(f'mode: malformed payload ({e})') from e
        mode.validate(data.get('profile_params'))
        return mode

    def validate(self, profile_params: Optional[Dict] = None):
        def fail(message):
            raise InvalidArtifact(f'mode: {message}')

        sol = self.base
        if profile_params is not None and profile_params != sol.params.to_dict():
            fail('recorded profile parameters differ from the profile it was loaded with')
        if len(self.alpha1) != sol.grid1.N + 1 or len(self.beta1) != sol.grid1.N + 1:
            fail('interior arrays do not match the profile grid')
        if (self.alpha2 is None) != (self.beta2 is None):
            fail('exterior alpha and beta have to be present together')
        if self.alpha2 is not None:
            if not sol.has_exterior:
                fail('exterior part on an interior-only profile')
            if len(self.alpha2) != sol.grid2.N + 1 or len(self.beta2) != sol.grid2.N + 1:
                fail('exterior arrays do not match the profile grid')
        eps = mpf(10)**(5 - mp.dps)
        kind = self.params.classification
        if kind in (ModeKind.SCALING, ModeKind.GAUGE):
            if abs(self.params.Omega - _analytic_coefficients(kind, sol.params)[0]) > eps:
                fail(f'{kind.value} at Omega = {mp.nstr(self.params.Omega, 8)}')
        elif kind == ModeKind.ZERO and any(a != 0 for a in self.alpha1):
            fail('0-mode does not vanish on [0, Z2]')
        if self.tail is not None and abs(self.tail.r - sol.params.r) > eps:
            fail('tail towers belong to another r')



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#              BACKGROUND & RESIDUAL              #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class Background:
    """
    ρ̂0, û0, their first two Z-derivatives and (d-1)û0/Z on one grid; `origin`
    marks the Z = 0 node
    """
    grid: CollocationGrid
    Z: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    u: np.ndarray
    du: np.ndarray
    u_over_Z: np.ndarray
    origin: Optional[int] = None
    d2rho: Optional[np.ndarray] = None
    d2u: Optional[np.ndarray] = None


def _log_derivatives(sigma, omega, params: EulerParams) -> Tuple[mpf, mpf, mpf, mpf]:
    """
    (Zσ', Zω') from Zσ' = -Δ2/Δ, Zω' = -Δ1/Δ and their derivatives in t = ln Z
    by the chain rule; valid off the sonic line
    """
    Delta, Delta1, Delta2 = field_components(sigma, omega, params)
    p = field_partials(sigma, omega, params)
    F, G = -Delta2/Delta, -Delta1/Delta
    F_s = -(p['Delta2_s'] + F*p['Delta_s'])/Delta
    F_w = -(p['Delta2_w'] + F*p['Delta_w'])/Delta
    G_s = -(p['Delta1_s'] + G*p['Delta_s'])/Delta
    G_w = -(p['Delta1_w'] + G*p['Delta_w'])/Delta
    return F, G, F_s*F + F_w*G, G_s*F + G_w*G


def _sonic_log_derivatives(params: EulerParams, sonic: SonicData) -> Tuple[mpf, mpf, mpf, mpf]:
    """Same at Z2 from the analytic branch through P2 in ξ = Z/Z2 - 1"""
    st, wt = sonic.s1, sonic.w1
    try:
        expansion = series_at_sonic(params, Location.SONIC_LEFT, 4, sonic=sonic)
        sz, wz = series_in_z(expansion, params, 3)
    except (ValidationError, ConvergenceError) as e:
        logger.debug(f'no second derivatives at Z2: {e}')
        return st, wt, mpf(0), mpf(0)
    # Z d/dZ (Z d/dZ) = (1+ξ)d/dξ (1+ξ)d/dξ, at ξ = 0
    return st, wt, sz[1] + 2*sz[2], wz[1] + 2*wz[2]


def background(sol: ProfileSolution, interval: int) -> Background:
    """
    Nodal background with its derivatives taken from the profile equations at
    the nodal (σ, ω), so that the jets at each node belong to one exact local
    trajectory. The origin node uses the even expansion S = δ + s_2 Z^2 + ...,
    the Z2 node the analytic branch through P2.
    """
    params = sol.params
    ell = params.ell
    k = mp.sqrt(ell/2)
    sonic = sonic_data(params)
    if interval == 1:
        g = sol.grid1
        f = sol.interior_fields()
        Z, W = f['Z'], f['W']
        sonic_node, origin = 0, g.N
        sigma = np.array([f['S'][n]/Z[n] if n != origin else mpf(0) for n in range(g.N + 1)], dtype=object)
    elif interval == 2:
        g = sol.grid2
        Z, W, sigma = g.nodes_Z, sol.omega_ext, sol.sigma_ext
        sonic_node, origin = g.N, None
    else:
        raise ValueError(f'interval has to be 1 or 2, got {interval}')

    n_nodes = g.N + 1
    rho, drho, d2rho = mpf_zeros(n_nodes), mpf_zeros(n_nodes), mpf_zeros(n_nodes)
    u, du, d2u = mpf_zeros(n_nodes), mpf_zeros(n_nodes), mpf_zeros(n_nodes)
    at_sonic = _sonic_log_derivatives(params, sonic)
    for n in range(n_nodes):
        if n == origin:
            delta = sol.delta
            rho[n] = (k*delta)**ell
            d2rho[n] = 2*ell*rho[n]*(sol.s2_unit/delta)/delta
            du[n] = -W[n]
            continue
        st, wt, stt, wtt = at_sonic if n == sonic_node else _log_derivatives(sigma[n], W[n], params)
        s, w, z = sigma[n], W[n], Z[n]
        rho[n] = (k*z*s)**ell
        q = 1 + st/s
        rho_t = ell*rho[n]*q
        rho_tt = ell*(rho_t*q + rho[n]*(stt/s - (st/s)**2))
        drho[n] = rho_t/z
        d2rho[n] = (rho_tt - rho_t)/z**2
        u[n] = -z*w
        du[n] = -(w + wt)
        d2u[n] = -(wt + wtt)/z
    return Background(g, Z, rho, drho, u, du, -W, origin=origin, d2rho=d2rho, d2u=d2u)


def _operator_blocks(bg: Background, params: EulerParams, Omega):
    """Coefficient arrays of R1, R2 (see the module docstring); the origin node uses L'Hôpital"""
    d, ell, r = params.d, params.ell, params.r
    gamma = params.gamma
    Omega = to_mpf(Omega)
    c11 = Omega + ell*(r - 1) + bg.du + (d - 1)*bg.u_over_Z
    a = bg.Z + bg.u
    rho_b = bg.rho.copy()
    c12 = np.array([mpf(0) if n == bg.origin else bg.drho[n] + (d - 1)*bg.rho[n]/bg.Z[n]
                    for n in range(len(bg.Z))], dtype=object)
    if bg.origin is not None:
        # (d-1)ρ̂0 β/Z -> (d-1)ρ̂0 β'(0)
        rho_b[bg.origin] = d*bg.rho[bg.origin]
    g = (gamma - 1)*bg.rho**(gamma - 2)
    c21 = (gamma - 1)*(gamma - 2)*bg.rho**(gamma - 3)*bg.drho
    c22 = Omega + r - 1 + bg.du
    return c11, a, rho_b, c12, g, c21, c22


def _residual_on(bg: Background, params: EulerParams, Omega, alpha, beta, da=None, db=None):
    """R1, R2 at the nodes; α', β' by the grid's D unless given"""
    c11, a, rho_b, c12, g, c21, c22 = _operator_blocks(bg, params, Omega)
    D = bg.grid.D()
    da = D.dot(alpha) if da is None else da
    db = D.dot(beta) if db is None else db
    R1 = c11*alpha + a*da + rho_b*db + c12*beta
    R2 = c22*beta + a*db + g*da + c21*alpha
    return R1, R2


def _matrix_on(bg: Background, params: EulerParams, Omega):
    """(dR1/dα, dR1/dβ, dR2/dα, dR2/dβ) as dense matrices"""
    c11, a, rho_b, c12, g, c21, c22 = _operator_blocks(bg, params, Omega)
    D = bg.grid.D()
    return (np.diag(c11) + a[:, None]*D, rho_b[:, None]*D + np.diag(c12),
            np.diag(c21) + g[:, None]*D, np.diag(c22) + a[:, None]*D)


def linearized_residual(sol: ProfileSolution, Omega, alpha: Tuple[np.ndarray, Optional[np.ndarray]],
                        beta: Tuple[np.ndarray, Optional[np.ndarray]],
                        derivatives: Optional[Dict[str, np.ndarray]] = None) -> Dict[str, np.ndarray]:
    """
    Nodewise (R1, R2) on I1 and, when present, I2; keys 'R1_I1', 'R2_I1',
    'R1_I2', 'R2_I2'. `derivatives` may carry exact nodal α', β' under the keys
    'alpha1', 'beta1', 'alpha2', 'beta2'.
    """
    derivatives = derivatives or {}
    out = {}
    R1, R2 = _residual_on(background(sol, 1), sol.params, Omega, alpha[0], beta[0],
                          derivatives.get('alpha1'), derivatives.get('beta1'))
    out['R1_I1'], out['R2_I1'] = R1, R2
    if alpha[1] is not None and sol.has_exterior:
        R1, R2 = _residual_on(background(sol, 2), sol.params, Omega, alpha[1], beta[1],
                              derivatives.get('alpha2'), derivatives.get('beta2'))
        out['R1_I2'], out['R2_I2'] = R1, R2
    return out


def mode_residual(mode: ModeSolution, skip_sonic: bool = True) -> mpf:
    """
    Max |R| over the nodes of a mode. The Z2 node is skipped by default, the
    equations being singular there.
    """
    res = linearized_residual(mode.base, mode.params.Omega, (mode.alpha1, mode.alpha2),
                              (mode.beta1, mode.beta2), mode.derivatives)
    worst = mpf(0)
    for key, values in res.items():
        sonic_node = 0 if key.endswith('I1') else len(values) - 1
        for n, v in enumerate(values):
            if skip_sonic and n == sonic_node:
                continue
            worst = max(worst, abs(v))
    return worst



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                 CONSTRUCTED MODES               #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def _check_exponents(params: EulerParams, Omega, sonic: SonicData, guard: float = EXPONENT_GUARD,
                     zero_mode: bool = False) -> mpf:
    Omega = to_mpf(Omega)
    Omega_min, Omega_max = omega_bounds(params, sonic)
    if Omega <= Omega_min:
        raise NonDecayingTail(f'Omega = {mp.nstr(Omega, 8)} is not above Omega_min = {mp.nstr(Omega_min, 8)}')
    N = regularity_N(params, Omega, sonic)
    if zero_mode and N <= 1:
        raise DomainError(f'N(Omega) = {mp.nstr(N, 8)} has to exceed 1 for a 0-mode')
    for value in (N, N - sonic.nu):
        if abs(value - mp.nint(value)) < guard:
            raise IntegerExponent(Omega, value, guard)
    return N


def _tail_rows(sol: ProfileSolution, Omega, k_cut: int) -> Tuple[ModeTailSeries, Tuple, Tuple]:
    towers = mode_series_at_infinity(sol.tail, sol.params, Omega, k_cut)
    t1, t2 = towers.basis(sol.Zp2)
    return towers, t1, t2


def build_zero_mode(sol: ProfileSolution, Omega, k_cut: int = DEFAULT_K_CUT,
                    guard: float = EXPONENT_GUARD) -> ModeSolution:
    """
    Zero on [0, Z2]; on I2 unknowns α, β, P = B0θ and B0 with α = β = 0 and R1
    at Z2, R1, R2 inside, the tail at Zp2 and B0 = 1. Normalized afterwards so
    that the leading coefficient of |ξ|^N at Z2 is one.
    """
    if not sol.has_exterior:
        raise DomainError('0-modes need an exterior profile')
    params = sol.params
    sonic = sonic_data(params)
    N_reg = _check_exponents(params, Omega, sonic, guard, zero_mode=True)
    bg = background(sol, 2)
    A11, A12, A21, A22 = _matrix_on(bg, params, Omega)
    towers, (ta1, tb1), (ta2, tb2) = _tail_rows(sol, Omega, k_cut)
    N = sol.grid2.N
    n = 2*N + 4
    M = mpf_zeros((n, n))
    rhs = mpf_zeros(n)

    M[0:N - 1, 0:N + 1] = A11[1:N, :]
    M[0:N - 1, N + 1:2*N + 2] = A12[1:N, :]
    M[N - 1:2*N - 2, 0:N + 1] = A21[1:N, :]
    M[N - 1:2*N - 2, N + 1:2*N + 2] = A22[1:N, :]
    # tail at Zp2: α_0 = P ta1 + B0 ta2, β_0 = P tb1 + B0 tb2
    M[2*N - 2, 0], M[2*N - 2, 2*N + 2], M[2*N - 2, 2*N + 3] = 1, -ta1, -ta2
    M[2*N - 1, N + 1], M[2*N - 1, 2*N + 2], M[2*N - 1, 2*N + 3] = 1, -tb1, -tb2
    M[2*N, N] = 1
    M[2*N + 1, 2*N + 1] = 1
    M[2*N + 2, 0:N + 1] = A11[N, :]
    M[2*N + 2, N + 1:2*N + 2] = A12[N, :]
    M[2*N + 3, 2*N + 3] = 1
    rhs[2*N + 3] = 1

    x = solve(M, rhs)
    alpha2, beta2 = x[0:N + 1], x[N + 1:2*N + 2]
    P, B0 = x[2*N + 2], x[2*N + 3]
    mode = ModeSolution(sol, ModeParams(to_mpf(Omega), N_reg, ModeKind.ZERO, P/B0),
                        mpf_zeros(sol.grid1.N + 1), mpf_zeros(sol.grid1.N + 1), alpha2, beta2, towers, B0)

    exponent, coefficient = leading_exponent_fit(mode, MINUS)
    mode = mode.scaled(1/coefficient)
    mode.leading_exponent = exponent
    logger.info(f'0-mode at Omega = {mp.nstr(to_mpf(Omega), 8)}: N = {mp.nstr(N_reg, 8)}, fitted exponent {mp.nstr(exponent, 6)}')
    return mode


def _interior_one_mode(sol: ProfileSolution, Omega) -> Tuple[np.ndarray, np.ndarray]:
    bg = background(sol, 1)
    A11, A12, A21, A22 = _matrix_on(bg, sol.params, Omega)
    N = sol.grid1.N
    n = 2*N + 2
    M = mpf_zeros((n, n))
    rhs = mpf_zeros(n)
    M[0:N, 0:N + 1] = A11[0:N, :]
    M[0:N, N + 1:] = A12[0:N, :]
    M[N:2*N, 0:N + 1] = A21[0:N, :]
    M[N:2*N, N + 1:] = A22[0:N, :]
    M[2*N, N] = 1
    rhs[2*N] = 1
    M[2*N + 1, 2*N + 1] = 1
    x = solve(M, rhs)
    return x[0:N + 1], x[N + 1:]


def _exterior_one_mode(sol: ProfileSolution, Omega, theta, beta_Z2, k_cut: int):
    bg = background(sol, 2)
    A11, A12, A21, A22 = _matrix_on(bg, sol.params, Omega)
    towers, (ta1, tb1), (ta2, tb2) = _tail_rows(sol, Omega, k_cut)
    theta = to_mpf(theta)
    N = sol.grid2.N
    n = 2*N + 3
    M = mpf_zeros((n, n))
    rhs = mpf_zeros(n)
    M[0:N, 0:N + 1] = A11[1:N + 1, :]
    M[0:N, N + 1:2*N + 2] = A12[1:N + 1, :]
    M[N:2*N, 0:N + 1] = A21[1:N + 1, :]
    M[N:2*N, N + 1:2*N + 2] = A22[1:N + 1, :]
    M[2*N, 2*N + 1] = 1
    rhs[2*N] = beta_Z2
    M[2*N + 1, 0], M[2*N + 1, 2*N + 2] = 1, -(theta*ta1 + ta2)
    M[2*N + 2, N + 1], M[2*N + 2, 2*N + 2] = 1, -(theta*tb1 + tb2)
    x = solve(M, rhs)
    return x[0:N + 1], x[N + 1:2*N + 2], x[2*N + 2], towers


def build_one_mode(sol: ProfileSolution, Omega, theta=None, k_cut: int = DEFAULT_K_CUT,
                   guard: float = EXPONENT_GUARD, fit: bool = True) -> ModeSolution:
    """
    Interior solution regular at the origin with α(0) = 1, β(0) = 0; with θ
    given, the exterior member of the θ-family matching β at Z2. The c^(N) and
    c^(ν-1) coefficients are fitted on every side present.
    """
    params = sol.params
    sonic = sonic_data(params)
    N_reg = _check_exponents(params, Omega, sonic, guard)
    alpha1, beta1 = _interior_one_mode(sol, Omega)
    mode = ModeSolution(sol, ModeParams(to_mpf(Omega), N_reg, ModeKind.ONE,
                                        None if theta is None else to_mpf(theta)), alpha1, beta1)
    if theta is not None and sol.has_exterior:
        alpha2, beta2, B0, towers = _exterior_one_mode(sol, Omega, theta, beta1[0], k_cut)
        mode.alpha2, mode.beta2, mode.B0, mode.tail = alpha2, beta2, B0, towers

    if fit:
        sides = [PLUS] + ([MINUS] if mode.alpha2 is not None else [])
        for side in sides:
            for name, exponent in (('N', N_reg), ('nu', sonic.nu - 1)):
                try:
                    mode.coefficients[f'c_{side}_{name}'] = mode_coefficient(mode, side, exponent)
                except (IllConditionedFit, PrecisionExhausted) as e:
                    logger.warning(f'c_{side}^({name}) at Omega = {mp.nstr(to_mpf(Omega), 8)}: {e}')
    return mode



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#              FITS AT THE SONIC POINT            #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def _side_data(mode: ModeSolution, side: str):
    sol = mode.base
    if side == PLUS:
        return sol.grid1, mode.alpha1, 0, -1
    if mode.alpha2 is None:
        raise DomainError('mode has no exterior part')
    return sol.grid2, mode.alpha2, sol.grid2.N, 1


def mode_coefficient(mode: ModeSolution, side: str, exponent, n_terms: int = 4) -> mpf:
    """Coefficient of |ξ|^exponent in α, ξ = (Z-Z2)/Z2, after [exponent] derivatives in ξ"""
    grid, alpha, node, direction = _side_data(mode, side)
    exponent = to_mpf(exponent)
    k = max(int(mp.floor(exponent)), 0)
    Z2 = mode.base.Z2
    D = grid.D()
    f = alpha
    for _ in range(k):
        f = Z2*D.dot(f)
    fit, _ = fit_at_sonic(grid, f, node, Z2, direction, lambda Z: (Z - Z2)/Z2, exponent - k, k, n_terms)
    return fit.coefficients[0]/falling_factorial(exponent, k)


def leading_exponent_fit(mode: ModeSolution, side: str = MINUS, window=(1e-4, 1e-2), samples: int = 20) -> Tuple[mpf, mpf]:
    """Log-log slope and prefactor of |α| against |ξ| next to Z2"""
    grid, alpha, _, direction = _side_data(mode, side)
    Z2 = mode.base.Z2
    lo, hi = window
    xs, ys = [], []
    for i in range(samples):
        zeta = lo*(hi/lo)**(i/(samples - 1))
        value = grid.interpolate(alpha, Z2*(1 + direction*mpf(zeta)))
        if value != 0:
            xs.append(np.log(zeta))
            ys.append(float(mp.log(abs(value))))
    if len(xs) < 2:
        raise InsufficientData('mode vanishes next to Z2')
    slope, intercept = np.polyfit(xs, ys, 1)
    sign = mp.sign(grid.interpolate(alpha, Z2*(1 + direction*mpf(hi))))
    return to_mpf(slope), sign*mp.exp(intercept)



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                 ANALYTIC MODES                  #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def _analytic_coefficients(kind: ModeKind, params: EulerParams) -> Tuple[mpf, mpf, mpf]:
    """(Ω, coefficient of ρ̂0, coefficient of û0); both modes add Zρ̂0' and Zû0'"""
    ell, r = params.ell, params.r
    if kind == ModeKind.SCALING:
        return mpf(0), -ell, mpf(-1)
    return r, ell*(r - 1), r - 1


def _analytic_on(bg: Background, kind: ModeKind, params: EulerParams):
    """(α, β, α', β') at the nodes; α' = (c_ρ+1)ρ̂0' + Zρ̂0'' and likewise for β"""
    _, ca, cb = _analytic_coefficients(kind, params)
    alpha = ca*bg.rho + bg.Z*bg.drho
    beta = cb*bg.u + bg.Z*bg.du
    return alpha, beta, (ca + 1)*bg.drho + bg.Z*bg.d2rho, (cb + 1)*bg.du + bg.Z*bg.d2u


def _analytic_tail(sol: ProfileSolution, kind: ModeKind, Z, scale) -> Tuple[mpf, mpf]:
    params = sol.params
    _, ca, cb = _analytic_coefficients(kind, params)
    p = sol.tail.at(Z)
    zs, zw = sol.tail.z_derivatives(Z)
    rho = (mp.sqrt(params.ell/2)*Z*p.sigma)**params.ell
    Zdrho = params.ell*rho*(1 + zs/p.sigma)
    u = -Z*p.omega
    Zdu = -Z*p.omega - Z*zw
    return scale*(ca*rho + Zdrho), scale*(cb*u + Zdu)


def analytic_modes(sol: ProfileSolution) -> Tuple[ModeSolution, ModeSolution]:
    """(scaling mode at Ω = 0, gauge mode at Ω = r), with exact nodal derivatives"""
    params = sol.params
    sonic = sonic_data(params)
    backgrounds = [background(sol, 1)] + ([background(sol, 2)] if sol.has_exterior else [])
    out = []
    for kind in (ModeKind.SCALING, ModeKind.GAUGE):
        Omega = _analytic_coefficients(kind, params)[0]
        a1, b1, da1, db1 = _analytic_on(backgrounds[0], kind, params)
        derivatives = {'alpha1': da1, 'beta1': db1}
        a2 = b2 = None
        if sol.has_exterior:
            a2, b2, derivatives['alpha2'], derivatives['beta2'] = _analytic_on(backgrounds[1], kind, params)
        out.append(ModeSolution(sol, ModeParams(Omega, regularity_N(params, Omega, sonic), kind),
                                a1, b1, a2, b2, derivatives=derivatives))
    return out[0], out[1]



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                 SPECTRUM SEARCH                 #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class SmoothModeRecord:
    Omega: mpf
    theta: Optional[mpf]
    N_regularity: mpf

    def to_dict(self) -> Dict:
        return {
            'Omega': encode_real(self.Omega),
            'theta': None if self.theta is None else encode_real(self.theta),
            'N_regularity': encode_real(self.N_regularity),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SmoothModeRecord':
        return cls(decode_real(data['Omega']), None if data.get('theta') is None else decode_real(data['theta']),
                   decode_real(data['N_regularity']))


@dataclass
class SpectrumScan:
    """Smooth-mode exponents in decreasing Ω (the gauge mode first) and the c+^(N) samples"""
    modes: List[SmoothModeRecord] = field(default_factory=list)
    samples: List[Tuple[mpf, mpf, mpf]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'schema_version': SCHEMA_VERSION,
            'modes': [m.to_dict() for m in self.modes],
            'samples': [[encode_real(x) for x in row] for row in self.samples],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SpectrumScan':
        check_schema(data, 'spectrum')
        try:
            scan = cls([SmoothModeRecord.from_dict(m) for m in data['modes']],
                       [tuple(decode_real(x) for x in row) for row in data['samples']])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArtifact(f'spectrum: malformed payload ({e})') from e
        scan.validate()
        return scan

    def validate(self):
        Omegas = [m.Omega for m in self.modes]
        if any(a <= b for a, b in zip(Omegas, Omegas[1:])):
            raise InvalidArtifact('spectrum: modes are not in decreasing Omega')
        if any(len(row) != 3 for row in self.samples):
            raise InvalidArtifact('spectrum: samples have to be (Omega, N, c) triples')


def c_plus_N(sol: ProfileSolution, Omega) -> mpf:
    mode = build_one_mode(sol, Omega, fit=False)
    return mode_coefficient(mode, PLUS, mode.params.N_regularity)


def c_minus_N(sol: ProfileSolution, Omega, theta) -> mpf:
    mode = build_one_mode(sol, Omega, theta, fit=False)
    return mode_coefficient(mode, MINUS, mode.params.N_regularity)


def _sweep_theta(sol: ProfileSolution, Omega, samples: int, xtol: float) -> Optional[mpf]:
    lo, hi = THETA_RANGE
    mags = [lo*(hi/lo)**(i/(samples - 1)) for i in range(samples)]
    thetas = [-m for m in reversed(mags)] + mags
    values = []
    for th in thetas:
        try:
            values.append(c_minus_N(sol, Omega, th))
        except ConvergenceError as e:
            logger.warning(f'theta = {th:.4g}: {e}')
            values.append(None)
    for (t0, c0), (t1, c1) in zip(zip(thetas, values), zip(thetas[1:], values[1:])):
        if c0 is None or c1 is None or (t0 < 0) != (t1 < 0):
            continue
        if c0 == 0:
            return to_mpf(t0)
        if c0*c1 < 0:
            return to_mpf(brentq(lambda th: float(c_minus_N(sol, Omega, th)), t0, t1, xtol=xtol))
    return None


def find_smooth_mode_exponents(sol: ProfileSolution, samples: int = 40, theta_samples: int = 13,
                               margin=0.1, xtol: float = 1e-7, guard: float = EXPONENT_GUARD,
                               gauge_tol: float = 1e-4) -> SpectrumScan:
    """
    Zeros of c+^(N)(Ω) for Ω in (-(s1+w1), r + margin], where N(Ω) < ν-1,
    bracketed inside one band of [N]; then θ with c-^(N)(Ω_j, θ) = 0 for each.
    Returned in decreasing Ω. The largest zero has to be the gauge mode
    Ω0 = r within gauge_tol, otherwise MissingGaugeMode is raised.
    """
    params = sol.params
    sonic = sonic_data(params)
    lo = -(sonic.s1 + sonic.w1)
    hi = params.r + to_mpf(margin)
    scan = SpectrumScan()
    Omegas = [lo + (hi - lo)*mpf(i + 1)/(samples + 1) for i in range(samples)]

    points = []
    for Omega in Omegas:
        try:
            N = _check_exponents(params, Omega, sonic, guard)
            c = c_plus_N(sol, Omega)
        except (IntegerExponent, NonDecayingTail, IllConditionedFit, PrecisionExhausted) as e:
            logger.warning(f'Omega = {mp.nstr(Omega, 8)} skipped: {e}')
            continue
        points.append((Omega, N, c))
        scan.samples.append((Omega, N, c))

    roots = []
    for (O0, N0, c0), (O1, N1, c1) in zip(points, points[1:]):
        if mp.floor(N0) != mp.floor(N1):
            continue
        if c0 == 0:
            roots.append(O0)
        elif c0*c1 < 0:
            roots.append(to_mpf(brentq(lambda O: float(c_plus_N(sol, O)), float(O0), float(O1), xtol=xtol)))

    roots = sorted(roots, reverse=True)
    gauge_error = None if not roots else abs(roots[0] - params.r)
    if gauge_error is None or gauge_error > gauge_tol:
        found = 'no zero' if not roots else f'largest zero {mp.nstr(roots[0], 10)}'
        raise MissingGaugeMode(f'{found} where the gauge mode Omega = r = {mp.nstr(params.r, 10)} is expected',
                               None if not roots else roots[0])
    logger.info(f'gauge mode recovered at Omega = {mp.nstr(roots[0], 10)} (|Omega - r| = {mp.nstr(gauge_error, 3)})')

    for Omega in roots:
        theta = _sweep_theta(sol, Omega, theta_samples, xtol) if sol.has_exterior else None
        scan.modes.append(SmoothModeRecord(Omega, theta, regularity_N(params, Omega, sonic)))
        logger.info(f'smooth mode Omega = {mp.nstr(Omega, 10)}, theta = {None if theta is None else mp.nstr(theta, 8)}')
    return scan


def omega1_trend(points: List[Tuple[float, float]]) -> Tuple[float, float, float]:
    """Affine least squares Ω1 ≈ a·r_n + b; returns (a, b, max abs residual)"""
    if len(points) < 2:
        raise InsufficientData(f'need at least 2 (r_n, Omega_1) points, got {len(points)}')
    x = np.array([float(p[0]) for p in points])
    y = np.array([float(p[1]) for p in points])
    a, b = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(a*x + b - y)))
    return float(a), float(b), residual


def normalize_for_evolution(mode: ModeSolution) -> ModeSolution:
    """
    Scales the mode so that max α = 1 > |min α| over the nodes. A mode whose
    largest positive and negative nodal values tie has no such scaling and is
    refused.
    """
    values = list(mode.alpha1) + ([] if mode.alpha2 is None else list(mode.alpha2))
    hi, lo = max(values), min(values)
    if hi == 0 and lo == 0:
        raise DomainError('mode vanishes identically')
    if hi == -lo:
        raise DomainError(f'max alpha = {mp.nstr(hi, 8)} ties with |min alpha|; the sign of the mode is undefined')
    if hi < -lo:
        mode = mode.scaled(-1)
        hi = -lo
    return mode.scaled(1/hi)
