"""
Local power-series expansions of profiles and of linear modes.

Truncated series are plain lists of coefficients. Every expansion is built by
recursive substitution: at order k the residual of the equations is affine in
the new coefficients, so it is evaluated with the unknowns set to zero and to
unit vectors and the small linear system is solved.
"""
# standard library
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple
import logging

# third-party libraries
from mpmath import mp, mpf

# local
from lib.arith import to_mpf, polyval_mp
from lib.errors import IntegerNuError, RecursionBreakdown, DomainError
from lib.file import encode_real, decode_real
from lib.phase_core import EulerParams, PhasePoint, SonicData, sonic_data, field_components


logger = logging.getLogger(__name__)

Series = List[mpf]

DEFAULT_N_TERMS = 12
DEFAULT_K_CUT = 10
DEFAULT_NU_GUARD = 1e-3



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#              TRUNCATED SERIES ALGEBRA           #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def s_const(c, n: int) -> Series:
    return [to_mpf(c)] + [mpf(0)]*(n - 1)

def s_add(*terms: Series) -> Series:
    n = min(len(t) for t in terms)
    return [sum((t[k] for t in terms), mpf(0)) for k in range(n)]

def s_sub(a: Series, b: Series) -> Series:
    return [x - y for x, y in zip(a, b)]

def s_scale(a: Series, c) -> Series:
    return [c*x for x in a]

def s_addc(a: Series, c) -> Series:
    return [a[0] + c] + list(a[1:])

def s_mul(a: Series, b: Series) -> Series:
    n = min(len(a), len(b))
    return [sum((a[j]*b[k - j] for j in range(k + 1)), mpf(0)) for k in range(n)]

def s_shift(a: Series, m: int) -> Series:
    """Multiplication by t^m, keeping the length"""
    return [mpf(0)]*m + list(a[:len(a) - m])

def s_tderiv(a: Series) -> Series:
    """t d/dt"""
    return [k*x for k, x in enumerate(a)]

def s_deriv(a: Series) -> Series:
    """d/dt, padded with a zero to keep the length"""
    return [(k + 1)*a[k + 1] for k in range(len(a) - 1)] + [mpf(0)]

def s_pow(a: Series, e) -> Series:
    """a^e for a[0] != 0 (J.C.P. Miller recurrence)"""
    n = len(a)
    if a[0] == 0:
        raise DomainError('series power needs a nonzero constant term')
    e = to_mpf(e)
    b = [a[0]**e] + [mpf(0)]*(n - 1)
    for k in range(1, n):
        acc = mpf(0)
        for j in range(1, k + 1):
            acc += (e*j - (k - j))*a[j]*b[k - j]
        b[k] = acc/(k*a[0])
    return b

def s_div(a: Series, b: Series) -> Series:
    n = min(len(a), len(b))
    if b[0] == 0:
        raise DomainError('series division needs a nonzero constant term in the divisor')
    q = [mpf(0)]*n
    for k in range(n):
        q[k] = (a[k] - sum((b[j]*q[k - j] for j in range(1, k + 1)), mpf(0)))/b[0]
    return q

def s_compose(f: Series, a: Series) -> Series:
    """f(a(t)) for a[0] = 0"""
    n = len(a)
    out = s_const(0, n)
    for c in reversed(f[:n]):
        out = s_addc(s_mul(out, a), c)
    return out



def solve_order_by_order(residual: Callable[[List[Series]], List[Series]],
                         init: List[Series], start: int, n: int,
                         shift: int = 0, where: str = '') -> List[Series]:
    """
    Fills coefficients `start..n-1` of every series in `init` so that the
    residual series vanish order by order. The residual equation of order
    `k - shift` determines the order-k unknowns.
    """
    coeffs = [list(c) + [mpf(0)]*(n - len(c)) for c in init]
    m = len(coeffs)
    tiny = mp.eps*mpf(10)**6

    for k in range(start, n):
        for c in coeffs:
            c[k] = mpf(0)
        base = [res[k - shift] for res in residual(coeffs)]
        A = mp.matrix(m, m)
        for j in range(m):
            coeffs[j][k] = mpf(1)
            trial = [res[k - shift] for res in residual(coeffs)]
            coeffs[j][k] = mpf(0)
            for i in range(m):
                A[i, j] = trial[i] - base[i]

        scale = max(abs(A[i, j]) for i in range(m) for j in range(m))
        if scale == 0 or abs(mp.det(A)) <= tiny*scale**m:
            raise RecursionBreakdown(k, where)
        x = mp.lu_solve(A, mp.matrix([-b for b in base]))
        for j in range(m):
            coeffs[j][k] = x[j]
    return coeffs



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                   EXPANSIONS                    #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

class Location(str, Enum):
    ORIGIN = 'Origin'
    SONIC_LEFT = 'SonicLeft'
    SONIC_RIGHT = 'SonicRight'
    INFINITY = 'Infinity'


@dataclass(frozen=True)
class SeriesExpansion:
    """
    Origin:   σ = Σ S_k Z^(k-1),  ω = Σ W_k Z^k        (S = Zσ)
    Infinity: σ = Σ S_k y^k,      ω = Σ W_k y^k,       y = Z^(-r)
    Sonic:    ω = Σ W_k ξ^k + c|ξ|^ν Σ b_j ξ^j,         ξ = σ - σ2
    """
    location: Location
    sigma_tower: Tuple[mpf, ...]
    omega_tower: Tuple[mpf, ...]
    n_terms: int
    leading_exponent: Optional[mpf] = None
    nonint_tower: Tuple[mpf, ...] = ()
    c_value: mpf = mpf(0)
    center: mpf = mpf(0)
    r: mpf = mpf(1)
    xi_sign: int = 1

    @property
    def integer_tower(self) -> Tuple[mpf, ...]:
        return self.omega_tower

    def at(self, Z) -> PhasePoint:
        Z = to_mpf(Z)
        if self.location == Location.ORIGIN:
            if Z == 0:
                return PhasePoint(mp.inf, self.omega_tower[0])
            return PhasePoint(polyval_mp(self.sigma_tower, Z)/Z, polyval_mp(self.omega_tower, Z))
        if self.location == Location.INFINITY:
            y = Z**(-self.r)
            return PhasePoint(polyval_mp(self.sigma_tower, y), polyval_mp(self.omega_tower, y))
        raise ValueError(f'{self.location.value} expansions are evaluated with omega_of_sigma')

    def z_derivatives(self, Z) -> Tuple[mpf, mpf]:
        """(Z dσ/dZ, Z dω/dZ) for the origin and infinity towers"""
        Z = to_mpf(Z)
        if self.location == Location.ORIGIN:
            zs = sum(((k - 1)*c*Z**(k - 1) for k, c in enumerate(self.sigma_tower)), mpf(0))
            zw = sum((k*c*Z**k for k, c in enumerate(self.omega_tower)), mpf(0))
            return zs, zw
        if self.location == Location.INFINITY:
            y = Z**(-self.r)
            zs = -self.r*sum((k*c*y**k for k, c in enumerate(self.sigma_tower)), mpf(0))
            zw = -self.r*sum((k*c*y**k for k, c in enumerate(self.omega_tower)), mpf(0))
            return zs, zw
        raise ValueError('only origin and infinity towers have Z derivatives')

    def omega_of_sigma(self, sigma) -> mpf:
        xi = to_mpf(sigma) - self.center
        out = polyval_mp(self.omega_tower, xi)
        if self.c_value != 0 and xi != 0:
            out += self.c_value*abs(xi)**self.leading_exponent*polyval_mp(self.nonint_tower, xi)
        return out

    def with_eta(self, eta) -> 'SeriesExpansion':
        """Infinity towers only: rescale the k-th coefficients by (eta'/eta)^k from a unit-eta tower"""
        if self.location != Location.INFINITY:
            raise ValueError('only infinity towers carry the eta scaling')
        eta = to_mpf(eta)
        return SeriesExpansion(self.location,
                               tuple(c*eta**k for k, c in enumerate(self.sigma_tower)),
                               tuple(c*eta**k for k, c in enumerate(self.omega_tower)),
                               self.n_terms, self.leading_exponent, self.nonint_tower,
                               self.c_value, self.center, self.r, self.xi_sign)

    def to_dict(self) -> Dict:
        return {
            'location': self.location.value,
            'sigma_tower': [encode_real(c) for c in self.sigma_tower],
            'omega_tower': [encode_real(c) for c in self.omega_tower],
            'n_terms': self.n_terms,
            'leading_exponent': None if self.leading_exponent is None else encode_real(self.leading_exponent),
            'nonint_tower': [encode_real(c) for c in self.nonint_tower],
            'c_value': encode_real(self.c_value),
            'center': encode_real(self.center),
            'r': encode_real(self.r),
            'xi_sign': self.xi_sign,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SeriesExpansion':
        return cls(Location(data['location']),
                   tuple(decode_real(c) for c in data['sigma_tower']),
                   tuple(decode_real(c) for c in data['omega_tower']),
                   int(data['n_terms']),
                   None if data['leading_exponent'] is None else decode_real(data['leading_exponent']),
                   tuple(decode_real(c) for c in data['nonint_tower']),
                   decode_real(data['c_value']), decode_real(data['center']),
                   decode_real(data['r']), int(data['xi_sign']))



def _A_series(W: Series, params: EulerParams) -> Series:
    d, ell, r = params.d, params.ell, params.r
    n = len(W)
    return s_add(s_scale(s_mul(W, W), ell + d - 1),
                 s_scale(W, -(ell + d + (ell - 1)*r)),
                 s_const(ell*r, n))


def _field_series(S: Series, W: Series, params: EulerParams):
    """(Δ, Δ1, Δ2) as series when σ and ω are series in the same variable"""
    d, ell, r = params.d, params.ell, params.r
    Wm1 = s_addc(W, -1)
    SS = s_mul(S, S)
    Delta = s_sub(s_mul(Wm1, Wm1), SS)
    Delta1 = s_sub(s_mul(W, s_mul(Wm1, s_addc(W, -r))), s_scale(s_mul(s_addc(W, -params.omega0), SS), d))
    Delta2 = s_scale(s_mul(S, s_sub(_A_series(W, params), s_scale(SS, ell))), 1/ell)
    return Delta, Delta1, Delta2


def series_at_origin(params: EulerParams, n_terms: int = DEFAULT_N_TERMS, delta=1) -> SeriesExpansion:
    """
    Regular expansion at the origin (P6) in S = Zσ = δ + S2 Z^2 + ..., ω = ω0 + W2 Z^2 + ...
    Solved from the Z^2- and Z^3-multiplied forms of the system so every
    order is polynomial.
    """
    if n_terms < 2:
        raise DomainError('n_terms has to be at least 2')
    d, ell, r = params.d, params.ell, params.r
    delta = to_mpf(delta)

    def residual(c):
        S, W = c
        n = len(S)
        Wm1 = s_addc(W, -1)
        SS = s_mul(S, S)
        Z2Delta = s_sub(s_shift(s_mul(Wm1, Wm1), 2), SS)
        Z2Delta1 = s_sub(s_shift(s_mul(W, s_mul(Wm1, s_addc(W, -r))), 2),
                         s_scale(s_mul(s_addc(W, -params.omega0), SS), d))
        Z3Delta2 = s_scale(s_mul(S, s_sub(s_shift(_A_series(W, params), 2), s_scale(SS, ell))), 1/ell)
        E1 = s_add(s_mul(Z2Delta, s_tderiv(W)), Z2Delta1)
        E2 = s_add(s_mul(Z2Delta, s_sub(s_tderiv(S), S)), Z3Delta2)
        return [E1, E2]

    S, W = solve_order_by_order(residual, [[delta], [params.omega0]], 1, n_terms, where='origin')
    return SeriesExpansion(Location.ORIGIN, tuple(S), tuple(W), n_terms)


def series_at_infinity(params: EulerParams, k_cut: int = DEFAULT_K_CUT, eta=None) -> SeriesExpansion:
    """Decaying tail σ ~ η y + ..., ω ~ κη y + ... with y = Z^(-r), orders 1..k_cut"""
    if params.kappa is None:
        raise DomainError('kappa has to be set for the expansion at infinity')
    if k_cut < 2:
        raise DomainError('k_cut has to be at least 2')
    r = params.r
    eta = params.eta if eta is None else to_mpf(eta)

    def residual(c):
        S, W = c
        Delta, Delta1, Delta2 = _field_series(S, W, params)
        R1 = s_add(s_scale(s_mul(Delta, s_tderiv(W)), -r), Delta1)
        R2 = s_add(s_scale(s_mul(Delta, s_tderiv(S)), -r), Delta2)
        return [R1, R2]

    n = k_cut + 1
    S, W = solve_order_by_order(residual, [[0, mpf(1)], [0, params.kappa]], 2, n, where='infinity')
    unit = SeriesExpansion(Location.INFINITY, tuple(S), tuple(W), k_cut, r=r, leading_exponent=-r)
    return unit.with_eta(eta)


def series_at_sonic(params: EulerParams, side: Location = Location.SONIC_LEFT,
                    n_terms: int = DEFAULT_N_TERMS, c_value=0,
                    guard: float = DEFAULT_NU_GUARD, sonic: Optional[SonicData] = None) -> SeriesExpansion:
    """
    ω as a function of σ through P2 along the slope ω- (the direction shared by
    the interior and the glued exterior trajectory). The integer tower is the
    analytic branch; the non-integer tower is the linear response |ξ|^ν Σ b_j ξ^j.
    """
    if side not in (Location.SONIC_LEFT, Location.SONIC_RIGHT):
        raise ValueError(f'side has to be SonicLeft or SonicRight, got {side}')
    if n_terms < 2:
        raise DomainError('n_terms has to be at least 2')
    sonic = sonic or sonic_data(params)
    nu = sonic.nu
    if abs(nu - mp.nint(nu)) < guard:
        raise IntegerNuError(nu, guard)

    d, ell, r = params.d, params.ell, params.r
    n = n_terms
    sigma_series = lambda m: [sonic.sigma2, mpf(1)] + [mpf(0)]*(m - 2)

    def residual(c):
        W = c[0]
        _, Delta1, Delta2 = _field_series(sigma_series(len(W)), W, params)
        return [s_sub(s_mul(Delta2, s_deriv(W)), Delta1)]

    W = solve_order_by_order(residual, [[sonic.omega2, sonic.omega_minus]], 2, n, where='sonic')[0]

    # linear response around the analytic branch, one order longer for p_(n+1)
    m = n + 2
    Wl = list(W) + [mpf(0)]*(m - n)
    Sg = sigma_series(m)
    _, _, P = _field_series(Sg, Wl, params)
    Delta2_w = s_scale(s_mul(Sg, s_addc(s_scale(Wl, 2*(ell + d - 1)), -(ell + d + (ell - 1)*r))), 1/ell)
    Delta1_w = s_add(s_scale(s_mul(Wl, Wl), 3), s_scale(Wl, -2*(1 + r)), s_const(r, m), s_scale(s_mul(Sg, Sg), -d))
    Q = s_sub(s_mul(Delta2_w, s_deriv(Wl)), Delta1_w)
    exponent = -Q[0]/P[1]
    b = [mpf(1)]
    for k in range(1, n):
        acc = sum((b[j]*((exponent + j)*P[k - j + 1] + Q[k - j]) for j in range(k)), mpf(0))
        b.append(-acc/(P[1]*k))

    xi_sign = (-1 if side == Location.SONIC_LEFT else 1)*(1 if sonic.s1 > 0 else -1)
    return SeriesExpansion(side, (sonic.sigma2, mpf(1)), tuple(W), n_terms,
                           leading_exponent=exponent, nonint_tower=tuple(b),
                           c_value=to_mpf(c_value), center=sonic.sigma2, r=r, xi_sign=xi_sign)


def series_in_z(expansion: SeriesExpansion, params: EulerParams, n_terms: Optional[int] = None) -> Tuple[Series, Series]:
    """
    Converts the analytic sonic tower to ξ = (Z-Z2)/Z2:
    σ = σ2 + Σ a_k ξ^k, ω = Σ W_k (σ-σ2)^k, with (1+ξ) da/dξ = -Δ2/Δ along the curve.
    Returns the coefficient lists (σ, ω); their first-order terms are s1 and w1.
    """
    n = n_terms or expansion.n_terms
    W = list(expansion.omega_tower[:n]) + [mpf(0)]*max(0, n + 1 - len(expansion.omega_tower))
    Sg = [expansion.center, mpf(1)] + [mpf(0)]*(len(W) - 2)
    Delta, _, Delta2 = _field_series(Sg, W, params)
    F = s_scale(s_div(Delta2[1:], Delta[1:]), -1)[:n]

    def residual(c):
        a = c[0]
        lhs = s_add(s_deriv(a), s_shift(s_deriv(a), 1))
        return [s_sub(lhs, s_compose(F, a))]

    a = solve_order_by_order(residual, [[mpf(0), F[0]]], 2, n, shift=1, where='sonic Z parameterization')[0]
    sigma = [expansion.center + a[0]] + a[1:]
    omega = s_compose(W[:n], a)
    return sigma, omega


def series_residual(expansion: SeriesExpansion, params: EulerParams, at) -> mpf:
    """
    Residual of the profile equations for a truncated expansion at one point:
    max(|Δ Zω' + Δ1|, |Δ Zσ' + Δ2|) at Z for origin/infinity towers,
    |Δ2 dω/dσ - Δ1| at σ for sonic towers.
    """
    if expansion.location in (Location.ORIGIN, Location.INFINITY):
        p = expansion.at(at)
        zs, zw = expansion.z_derivatives(at)
        Delta, Delta1, Delta2 = field_components(p.sigma, p.omega, params)
        return max(abs(Delta*zw + Delta1), abs(Delta*zs + Delta2))

    sigma = to_mpf(at)
    omega = expansion.omega_of_sigma(sigma)
    slope = mp.diff(expansion.omega_of_sigma, sigma)
    _, Delta1, Delta2 = field_components(sigma, omega, params)
    return abs(Delta2*slope - Delta1)



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                  MODE TOWERS                    #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass(frozen=True)
class ModeTailSeries:
    """
    Decaying mode data at infinity, y = Z^(-r):

        α = Z^(-a) (θ F1 + F2)(y) B0,   β = Z^(-b) (θ G1 + G2)(y) B0
        a = ℓ(r-1) + Ω,  b = r - 1 + Ω

    (F1, G1) starts from (1, 0) and (F2, G2) from (0, 1).
    """
    a: mpf
    b: mpf
    r: mpf
    F1: Tuple[mpf, ...]
    G1: Tuple[mpf, ...]
    F2: Tuple[mpf, ...]
    G2: Tuple[mpf, ...]

    def basis(self, Z) -> Tuple[Tuple[mpf, mpf], Tuple[mpf, mpf]]:
        """((α, β) of the first tower, (α, β) of the second) at Z"""
        Z = to_mpf(Z)
        y = Z**(-self.r)
        za, zb = Z**(-self.a), Z**(-self.b)
        return ((za*polyval_mp(self.F1, y), zb*polyval_mp(self.G1, y)),
                (za*polyval_mp(self.F2, y), zb*polyval_mp(self.G2, y)))

    def evaluate(self, Z, theta, B0=1) -> Tuple[mpf, mpf]:
        (a1, b1), (a2, b2) = self.basis(Z)
        theta, B0 = to_mpf(theta), to_mpf(B0)
        return B0*(theta*a1 + a2), B0*(theta*b1 + b2)

    def to_dict(self) -> Dict:
        return {
            'a': encode_real(self.a),
            'b': encode_real(self.b),
            'r': encode_real(self.r),
            **{name: [encode_real(c) for c in getattr(self, name)] for name in ('F1', 'G1', 'F2', 'G2')},
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModeTailSeries':
        towers = {name: tuple(decode_real(c) for c in data[name]) for name in ('F1', 'G1', 'F2', 'G2')}
        return cls(decode_real(data['a']), decode_real(data['b']), decode_real(data['r']), **towers)


def mode_series_at_infinity(tail: SeriesExpansion, params: EulerParams, Omega,
                            n_terms: int = DEFAULT_K_CUT) -> ModeTailSeries:
    d, ell, r = params.d, params.ell, params.r
    gamma = params.gamma
    Omega = to_mpf(Omega)
    a = ell*(r - 1) + Omega
    b = r - 1 + Omega
    e_H = 2*(1 - r) - Omega
    K = (ell/2)**(ell/2)
    n = n_terms + 1

    W = list(tail.omega_tower[:n]) + [mpf(0)]*max(0, n - len(tail.omega_tower))
    shifted = list(tail.sigma_tower[1:n + 1]) + [mpf(0)]*max(0, n + 1 - len(tail.sigma_tower))
    P = s_pow(shifted[:n], ell)
    P_gm2 = s_pow(P, gamma - 2)

    def residual(c):
        F, G = c
        rW = s_scale(s_tderiv(W), r)
        one_minus_W = s_addc(s_scale(W, -1), 1)
        E22 = s_add(
            s_mul(s_addc(s_add(s_scale(W, -d), rW), Omega + ell*(r - 1)), F),
            s_mul(one_minus_W, s_add(s_scale(F, -a), s_scale(s_tderiv(F), -r))),
            s_scale(s_shift(s_mul(P, s_add(s_scale(G, -b), s_scale(s_tderiv(G), -r))), 1), K),
            s_scale(s_shift(s_mul(s_add(s_scale(P, ell*(1 - r) + d - 1), s_scale(s_tderiv(P), -r)), G), 1), K),
        )
        Qs = s_mul(P_gm2, F)
        E23 = s_add(
            s_mul(s_addc(s_add(s_scale(W, -1), rW), Omega + r - 1), G),
            s_mul(one_minus_W, s_add(s_scale(G, -b), s_scale(s_tderiv(G), -r))),
            s_scale(s_shift(s_add(s_scale(Qs, e_H), s_scale(s_tderiv(Qs), -r)), 1), (gamma - 1)*K**(gamma - 2)),
        )
        return [E22, E23]

    F1, G1 = solve_order_by_order(residual, [[mpf(1)], [mpf(0)]], 1, n, where='mode tail')
    F2, G2 = solve_order_by_order(residual, [[mpf(0)], [mpf(1)]], 1, n, where='mode tail')
    return ModeTailSeries(a, b, r, tuple(F1), tuple(G1), tuple(F2), tuple(G2))
