"""
Parameters, the autonomous vector field and the local data at the sonic point P2.

With x = ln Z the self-similar profiles satisfy

    dω/dx = -Δ1/Δ,    dσ/dx = -Δ2/Δ

    Δ  = (ω-1)^2 - σ^2
    Δ1 = ω(ω-1)(ω-r) - d(ω-ω0)σ^2,                 ω0 = ℓ(r-1)/d
    Δ2 = (σ/ℓ)[(ℓ+d-1)ω^2 - (ℓ+d+(ℓ-1)r)ω + ℓr - ℓσ^2]

All arithmetic goes through mpmath at the current `mp.dps`; the field helpers
also accept numpy object arrays and act elementwise.
"""
# standard library
from dataclasses import dataclass, replace, asdict
from typing import Dict, Optional, Tuple

# third-party libraries
import numpy as np
from mpmath import mp, mpf

# local
from lib.arith import to_mpf
from lib.errors import DomainError, DegenerateSonicPoint, InvalidArtifact
from lib.file import encode_real, decode_real



SCHEMA_VERSION = 2


def check_schema(data: Dict, kind: str):
    if not isinstance(data, dict):
        raise InvalidArtifact(f'{kind}: payload is not an object')
    if data.get('schema_version') != SCHEMA_VERSION:
        raise InvalidArtifact(f'{kind}: schema version {data.get("schema_version")} != {SCHEMA_VERSION}')



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                   PARAMETERS                    #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def critical_speed(d: int, ell) -> Tuple[mpf, mpf, mpf]:
    """
    Returns (r*, r+, r_crit). r_crit is r* below ℓ = d and r+ above; the two
    coincide at ℓ = d.
    """
    if int(d) != d or d < 2:
        raise DomainError(f'dimension has to be an integer >= 2, got {d}')
    ell = to_mpf(ell)
    if ell <= 0:
        raise DomainError(f'ell has to be positive, got {ell}')

    r_star = (d + ell)/(ell + mp.sqrt(d))
    r_plus = 1 + (d - 1)/(1 + mp.sqrt(ell))**2
    r_crit = r_star if ell <= d else r_plus
    return r_star, r_plus, r_crit


def admissible_window(d: int, ell) -> Tuple[mpf, mpf]:
    return mpf(1), critical_speed(d, ell)[2]


@dataclass(frozen=True)
class EulerParams:
    """
    (d, ℓ, r) fix the profile equations; κ labels the exterior trajectory that
    ends at P4 and η the scaling of its tail (σ ~ η/Z^r, ω ~ κη/Z^r).

    Direct construction does not validate, so that degenerate points can still be
    examined; use `EulerParams.create` for user input.
    """
    d: int
    ell: mpf
    r: mpf
    kappa: Optional[mpf] = None
    eta: mpf = mpf(1)

    @classmethod
    def create(cls, d, ell, r, kappa=None, eta=1) -> 'EulerParams':
        p = cls(int(d), to_mpf(ell), to_mpf(r),
                None if kappa is None else to_mpf(kappa), to_mpf(eta))
        p.validate()
        return p

    def validate(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f'dimension has to be an integer >= 2, got {self.d}')
        if self.ell <= 0:
            raise DomainError(f'ell has to be positive, got {self.ell}')
        if self.eta <= 0:
            raise DomainError(f'eta has to be positive, got {self.eta}')
        r_crit = self.r_crit
        if not (1 < self.r < r_crit):
            raise DomainError(f'r = {mp.nstr(self.r, 12)} is outside the admissible window (1, {mp.nstr(r_crit, 12)})')

    def with_(self, **changes) -> 'EulerParams':
        changes = {k: (None if v is None else (v if k == 'd' else to_mpf(v))) for k, v in changes.items()}
        return replace(self, **changes)

    @property
    def gamma(self) -> mpf:
        return 1 + 2/self.ell

    @property
    def omega0(self) -> mpf:
        """ω at the origin (P6)"""
        return self.ell*(self.r - 1)/self.d

    @property
    def L(self) -> mpf:
        """(ℓ+1)(r-1)-(d+1); negative in the admissible window"""
        return (self.ell + 1)*(self.r - 1) - (self.d + 1)

    @property
    def r_star(self) -> mpf:
        return critical_speed(self.d, self.ell)[0]

    @property
    def r_plus(self) -> mpf:
        return critical_speed(self.d, self.ell)[1]

    @property
    def r_crit(self) -> mpf:
        return critical_speed(self.d, self.ell)[2]

    def to_dict(self) -> Dict:
        return {
            'd': self.d,
            'ell': encode_real(self.ell),
            'r': encode_real(self.r),
            'kappa': None if self.kappa is None else encode_real(self.kappa),
            'eta': encode_real(self.eta),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'EulerParams':
        return cls(int(data['d']), decode_real(data['ell']), decode_real(data['r']),
                   None if data.get('kappa') is None else decode_real(data['kappa']),
                   decode_real(data.get('eta', '1')))


@dataclass(frozen=True)
class PhasePoint:
    sigma: mpf
    omega: mpf



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                  VECTOR FIELD                   #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def _A(omega, params: EulerParams):
    d, ell, r = params.d, params.ell, params.r
    return (ell + d - 1)*omega**2 - (ell + d + (ell - 1)*r)*omega + ell*r


def field_components(sigma, omega, params: EulerParams):
    """(Δ, Δ1, Δ2); works on scalars and elementwise on arrays"""
    d, ell, r = params.d, params.ell, params.r
    Delta = (omega - 1)**2 - sigma**2
    Delta1 = omega*(omega - 1)*(omega - r) - d*(omega - params.omega0)*sigma**2
    Delta2 = (sigma/ell)*(_A(omega, params) - ell*sigma**2)
    return Delta, Delta1, Delta2


def field_partials(sigma, omega, params: EulerParams) -> Dict[str, object]:
    """Hand-coded first derivatives of Δ, Δ1, Δ2 with respect to ω and σ"""
    d, ell, r = params.d, params.ell, params.r
    return {
        'Delta_w': 2*(omega - 1),
        'Delta_s': -2*sigma,
        'Delta1_w': 3*omega**2 - 2*(1 + r)*omega + r - d*sigma**2,
        'Delta1_s': -2*d*(omega - params.omega0)*sigma,
        'Delta2_w': (sigma/ell)*(2*(ell + d - 1)*omega - (ell + d + (ell - 1)*r)),
        'Delta2_s': _A(omega, params)/ell - 3*sigma**2,
    }


def vector_field(p: PhasePoint, params: EulerParams) -> Tuple[mpf, mpf, mpf]:
    return field_components(p.sigma, p.omega, params)


def vector_field_jacobian(p: PhasePoint, params: EulerParams):
    """[[∂ωΔ1, ∂σΔ1], [∂ωΔ2, ∂σΔ2]] at p"""
    j = field_partials(p.sigma, p.omega, params)
    return ((j['Delta1_w'], j['Delta1_s']), (j['Delta2_w'], j['Delta2_s']))


def singular_points(params: EulerParams) -> Dict[str, Tuple[mpf, mpf]]:
    """Finite singular points as (σ, ω); P6 sits at σ = ∞, ω = ω0"""
    sonic = sonic_data(params)
    return {
        'P1': (mpf(0), mpf(1)),
        'P2': (sonic.sigma2, 1 - sonic.sigma2),
        'P3': (sonic.sigma3, 1 - sonic.sigma3),
        'P4': (mpf(0), mpf(0)),
        'P5': (mpf(0), params.r),
        'P6': (mp.inf, params.omega0),
    }



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                   SONIC POINT                   #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass(frozen=True)
class SonicData:
    sigma2: mpf
    sigma3: mpf
    c1: mpf
    c2: mpf
    c3: mpf
    c4: mpf
    lambda_plus: mpf
    lambda_minus: mpf
    nu: mpf
    omega_plus: mpf
    omega_minus: mpf
    s1: mpf
    w1: mpf

    @property
    def omega2(self) -> mpf:
        return 1 - self.sigma2

    @property
    def point(self) -> PhasePoint:
        return PhasePoint(self.sigma2, 1 - self.sigma2)

    def to_dict(self) -> Dict:
        out = {k: encode_real(v) for k, v in asdict(self).items()}
        out['schema_version'] = SCHEMA_VERSION
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> 'SonicData':
        return cls(**{k: decode_real(v) for k, v in data.items() if k != 'schema_version'})


def sonic_roots(params: EulerParams) -> Tuple[mpf, mpf]:
    """Roots of (d-1)σ^2 - (d-1-(ℓ-1)(r-1))σ + (r-1) = 0, larger first"""
    d, ell, r = params.d, params.ell, params.r
    a = mpf(d - 1)
    b = -(d - 1 - (ell - 1)*(r - 1))
    c = r - 1
    disc = b**2 - 4*a*c
    if disc <= 0:
        raise DegenerateSonicPoint(f'sonic quadratic discriminant is {mp.nstr(disc, 8)} for d={d}, ell={ell}, r={r}')
    sq = mp.sqrt(disc)
    return (-b + sq)/(2*a), (-b - sq)/(2*a)


def sonic_data(params: EulerParams) -> SonicData:
    sigma2, sigma3 = sonic_roots(params)
    if sigma2 == sigma3:
        raise DegenerateSonicPoint('sigma2 and sigma3 coincide')

    j = field_partials(sigma2, 1 - sigma2, params)
    c1, c3 = j['Delta1_w'], j['Delta1_s']
    c2, c4 = j['Delta2_w'], j['Delta2_s']

    disc = (c1 - c4)**2 + 4*c2*c3
    if disc <= 0:
        raise DegenerateSonicPoint(f'P2 has no two real eigendirections (discriminant {mp.nstr(disc, 8)})')
    root = mp.sqrt(disc)
    lambda_plus = (c1 + c4 + root)/2
    lambda_minus = (c1 + c4 - root)/2
    nu = lambda_minus/lambda_plus

    omega_plus = (c4 - c1 + root)/(2*abs(c2))
    omega_minus = (c4 - c1 - root)/(2*abs(c2))

    # the (+) branch of w1 belongs to the slope ω- of the P2-P6 trajectory
    w1 = ((c1**2 - c1*c3 + 2*c2*c3 - c1*c4 - c3*c4) + (c1 - c3)*root)/(4*sigma2*(c1 + c2 - c3 - c4))
    s1 = -w1*(c1 - 2*sigma2*w1)/(c3 - 2*sigma2*w1)

    return SonicData(sigma2, sigma3, c1, c2, c3, c4, lambda_plus, lambda_minus, nu,
                     omega_plus, omega_minus, s1, w1)


def sonic_K(sonic: SonicData, params: EulerParams) -> mpf:
    d, ell, r = params.d, params.ell, params.r
    return (2 - d + ell*(r - 1) - r) + 2*(d - 1)*sonic.sigma2


def sonic_mode_coefficients(sonic: SonicData, params: EulerParams, Omega) -> Tuple[mpf, mpf]:
    """
    (m1, m2) of the leading perturbation system at Z2,

        ξ dv/dξ = [[m1, -m2], [-m1, m2]] v,   v = (α̃, β)

    with eigenvalues 0 and m1 + m2 = N(Ω).
    """
    ell = params.ell
    S = sonic.s1 + sonic.w1
    K = sonic_K(sonic, params)
    m1 = to_mpf(Omega)/(2*S) + K*sonic.w1/(2*ell*S**2)
    m2 = to_mpf(Omega)/(2*S) - K*ell*sonic.s1/(2*ell*S**2)
    return m1, m2


def t2_identity(sonic: SonicData, params: EulerParams) -> mpf:
    """Trace of the leading sonic matrix at Ω = 0; equals ν"""
    m1, m2 = sonic_mode_coefficients(sonic, params, 0)
    return m1 + m2


def s1_plus_w1_closed_form(sonic: SonicData, params: EulerParams) -> mpf:
    return (params.L/2)/(sonic.nu + 1)


def mode_matrix(sigma, omega, params: EulerParams, Omega):
    """
    Coefficient matrix of Z dv/dZ = M v for v = (α̃, β), α = ρ̂ α̃/(Zσ):

        M = (Ω/Δ) M1 + M2/Δ^2
    """
    d, ell, r = params.d, params.ell, params.r
    Omega = to_mpf(Omega)
    Delta, Delta1, Delta2 = field_components(sigma, omega, params)

    M1 = np.array([[omega - 1, sigma], [sigma, omega - 1]], dtype=object)
    M2 = np.array([
        [(Delta + 2*sigma**2)*(Delta - Delta2/sigma),
         sigma*(-(d + ell - r*(ell + 1) + 2*omega)*Delta + 2*Delta1)],
        [-2*(1 - omega)*sigma*(Delta - Delta2/sigma),
         -2*ell*sigma*Delta2 - (r - 1 - (d - 1 + 2*ell)*sigma**2)*Delta],
    ], dtype=object)
    return (Omega/Delta)*M1 + M2/Delta**2
