"""
Non-smooth coefficients c+ (interior side of P2) and c- (exterior side) of a
converged profile, and the root searches for the smooth solutions: r_n with
c+(r_n) = 0, then κ with c-(κ) = 0 at fixed r_n.

Near P2 a profile behaves like ω(σ) = Σ ω̃_j ξ^j + c|ξ|^ν(1 + b_1 ξ + ...),
ξ = σ - σ2. After [ν] derivatives in σ the non-smooth part dominates the
linear term, so c is read off a small least-squares fit.
"""
# standard library
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import logging

# third-party libraries
import numpy as np
from mpmath import mp, mpf
from scipy.optimize import brentq

# local
from lib.arith import to_mpf, lstsq, falling_factorial
from lib.errors import IllConditionedFit, NoSignChange, PrecisionExhausted, DomainError, InvalidArtifact
from lib.file import encode_real, decode_real
from lib.phase_core import SCHEMA_VERSION, EulerParams, check_schema, sonic_data, critical_speed
from lib.profile_solver import (ProfileSolution, SolverOptions, solve_profile, admissible_kappa_window,
                                interpolate)
from lib.series import Location, series_at_sonic, DEFAULT_NU_GUARD
from lib.spectral import CollocationGrid
from lib.sweep import map_samples


logger = logging.getLogger(__name__)

PLUS = 'plus'
MINUS = 'minus'

FIT_WINDOWS = ((1e-6, 1e-4), (1e-5, 1e-3), (1e-4, 1e-2), (1e-6, 1e-2))
FIT_SAMPLES = 40
CONDITION_BOUND = 1e12
RELATIVE_RESIDUAL_BOUND = 1e-3
R_XTOL = 1e-7



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                 FITTING CORE                    #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class FitOutcome:
    coefficients: np.ndarray
    condition_number: float
    relative_residual: mpf
    window: Tuple[float, float]


def _basis(xi, frac_exponent, k: int, n_terms: int) -> List[mpf]:
    s = 1 if xi > 0 else -1
    a = abs(xi)
    full = [s**k*a**frac_exponent, xi, xi**2, s**(k + 1)*a**(frac_exponent + 1)]
    return full[:n_terms]


def fit_nonsmooth(xi: Sequence, values: Sequence, frac_exponent, n_terms: int = 4, k: int = 0) -> FitOutcome:
    """
    Least squares of values(ξ) on sgn^k|ξ|^φ, ξ, ξ², sgn^(k+1)|ξ|^(φ+1)
    (the first n_terms of them). The condition number is estimated in double
    precision on the column-scaled matrix.
    """
    if not 1 <= n_terms <= 4:
        raise ValueError(f'n_terms has to be between 1 and 4, got {n_terms}')
    if len(xi) < n_terms:
        raise ValueError('need at least as many samples as fit terms')
    phi = to_mpf(frac_exponent)
    A = np.array([_basis(to_mpf(x), phi, k, n_terms) for x in xi], dtype=object)
    y = np.array([to_mpf(v) for v in values], dtype=object)

    scale = np.array([max(abs(v) for v in A[:, j]) for j in range(n_terms)], dtype=object)
    Af = np.array([[float(A[i, j]/scale[j]) for j in range(n_terms)] for i in range(len(xi))])
    cond = float(np.linalg.cond(Af))

    coeffs, res = lstsq(A, y)
    norm_y = mp.sqrt(sum(v**2 for v in y))
    rel = res/norm_y if norm_y != 0 else res
    return FitOutcome(coeffs, cond, rel, (float(min(abs(x) for x in xi)), float(max(abs(x) for x in xi))))


def fit_at_sonic(grid: CollocationGrid, nodal: np.ndarray, sonic_node: int, Z2, direction: int,
                 xi_of_Z: Callable, frac_exponent, k: int, n_terms: int = 4,
                 windows=FIT_WINDOWS, samples: int = FIT_SAMPLES,
                 cond_bound: float = CONDITION_BOUND) -> Tuple[FitOutcome, mpf]:
    """
    Fits nodal(Z) - nodal(Z2) at Z = Z2 + direction·ζ for ζ geometric in each
    candidate window (relative to Z2), keeping the best-conditioned window.
    Returns the fit and nodal(Z2).
    """
    Z2 = to_mpf(Z2)
    at_sonic = nodal[sonic_node]
    best = None
    for lo, hi in windows:
        zetas = [Z2*mpf(lo)*(mpf(hi)/mpf(lo))**(mpf(i)/(samples - 1)) for i in range(samples)]
        Zs = [Z2 + direction*z for z in zetas]
        xi = [xi_of_Z(Z) for Z in Zs]
        y = [grid.interpolate(nodal, Z) - at_sonic for Z in Zs]
        try:
            out = fit_nonsmooth(xi, y, frac_exponent, n_terms, k)
        except (ZeroDivisionError, ValueError):
            continue
        out.window = (lo, hi)
        if best is None or out.condition_number < best.condition_number:
            best = out
    if best is None or best.condition_number > cond_bound:
        raise IllConditionedFit(float('inf') if best is None else best.condition_number, cond_bound)
    if best.relative_residual > RELATIVE_RESIDUAL_BOUND:
        raise PrecisionExhausted(f'relative fit residual {mp.nstr(best.relative_residual, 3)} '
                                 f'exceeds {RELATIVE_RESIDUAL_BOUND}')
    return best, at_sonic



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#              COEFFICIENT EXTRACTION             #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class CoefficientFit:
    side: str
    nu: mpf
    nu_int: int
    c_value: mpf
    a1: mpf
    a1_analytic: mpf
    a1_error: mpf
    omega_k_error: mpf
    fit_window: Tuple[float, float]
    n_fit_terms: int
    condition_number: float

    def to_dict(self) -> Dict:
        out = {k: (encode_real(v) if isinstance(v, mpf) else v) for k, v in asdict(self).items()}
        out['fit_window'] = list(self.fit_window)
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> 'CoefficientFit':
        return cls(data['side'], decode_real(data['nu']), int(data['nu_int']), decode_real(data['c_value']),
                   decode_real(data['a1']), decode_real(data['a1_analytic']), decode_real(data['a1_error']),
                   decode_real(data['omega_k_error']), tuple(data['fit_window']), int(data['n_fit_terms']),
                   float(data['condition_number']))


def sigma_derivative_tower(sol: ProfileSolution, side: str, k: int):
    """
    Nodal d^j ω/dσ^j, j = 0..k, on the interval of the given side; returns
    (grid, tower, index of the Z2 node, σ evaluator).
    """
    if side == PLUS:
        f = sol.interior_fields()
        grid = sol.grid1
        Z = f['Z']
        # dZ/dσ = Z^2/(Z S' - S), which vanishes at the origin node
        dZ_dsigma = Z*Z/(f['ZS'] - f['S'])
        node = 0
        sigma_of_Z = lambda z: interpolate(sol, z).sigma
    elif side == MINUS:
        f = sol.exterior_fields()
        grid = sol.grid2
        dZ_dsigma = f['Z']/f['Zs']
        node = grid.N
        sigma_of_Z = lambda z: grid.interpolate(sol.sigma_ext, z)
    else:
        raise ValueError(f'side has to be {PLUS} or {MINUS}, got {side}')

    D = grid.D()
    tower = [f['W']] if side == PLUS else [f['omega']]
    for _ in range(k):
        tower.append(D.dot(tower[-1])*dZ_dsigma)
    return grid, tower, node, sigma_of_Z


def extract_c(sol: ProfileSolution, side: str = PLUS, k: Optional[int] = None, n_terms: int = 4,
              guard: float = DEFAULT_NU_GUARD, cond_bound: float = CONDITION_BOUND) -> CoefficientFit:
    params = sol.params
    sonic = sonic_data(params)
    nu = sonic.nu
    location = Location.SONIC_LEFT if side == PLUS else Location.SONIC_RIGHT
    analytic = series_at_sonic(params, location, max(int(nu) + 3, 4), guard=guard, sonic=sonic)
    k = int(mp.floor(nu)) if k is None else k
    if k + 1 >= len(analytic.omega_tower):
        raise DomainError(f'derivative order {k} exceeds the analytic tower')

    grid, tower, node, sigma_of_Z = sigma_derivative_tower(sol, side, k)
    direction = -1 if side == PLUS else 1
    fit, fk0 = fit_at_sonic(grid, tower[k], node, sol.Z2, direction,
                            lambda Z: sigma_of_Z(Z) - sonic.sigma2, nu - k, k, n_terms, cond_bound=cond_bound)

    c_tilde, a1 = fit.coefficients[0], (fit.coefficients[1] if n_terms > 1 else mpf(0))
    c_value = c_tilde/falling_factorial(nu, k)
    a1_analytic = mp.factorial(k + 1)*analytic.omega_tower[k + 1]
    wk = analytic.omega_tower[k]
    out = CoefficientFit(side, nu, k, c_value, a1, a1_analytic,
                         abs(a1 - a1_analytic)/abs(a1_analytic),
                         abs(fk0/mp.factorial(k) - wk)/abs(wk),
                         fit.window, n_terms, fit.condition_number)
    logger.debug(f'c_{side} = {mp.nstr(c_value, 8)} (nu = {mp.nstr(nu, 8)}, cond {fit.condition_number:.2e})')
    return out


def smoothness_report(sol: ProfileSolution, side: str = PLUS, k: Optional[int] = None) -> Dict[str, object]:
    """Δω̃ at orders [ν] and [ν]+1 against the analytic sonic tower"""
    fit = extract_c(sol, side, k)
    return {
        'side': side,
        'nu_int': fit.nu_int,
        'delta_omega_nu_int': encode_real(fit.omega_k_error),
        'delta_omega_nu_int_plus_1': encode_real(fit.a1_error),
        'c_value': encode_real(fit.c_value),
    }



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                 ROOT SEARCHES                   #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def nu_at(d: int, ell, r) -> mpf:
    return sonic_data(EulerParams(int(d), to_mpf(ell), to_mpf(r))).nu


def _r_where_nu(d: int, ell, target, lo, hi, iterations: int = 80) -> mpf:
    """Bisection for ν(r) = target; ν grows towards r_crit"""
    target = to_mpf(target)
    for _ in range(iterations):
        mid = (lo + hi)/2
        if nu_at(d, ell, mid) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi)/2


def nu_interval(d: int, ell, k: int) -> Tuple[mpf, mpf]:
    """r-interval on which [ν(r)] = k"""
    _, _, r_crit = critical_speed(d, ell)
    eps = mpf(10)**(-mp.dps//2)
    lo, hi = 1 + eps, r_crit - eps
    nu_lo, nu_hi = nu_at(d, ell, lo), nu_at(d, ell, hi)
    if not (nu_lo < k + 1 and nu_hi > k):
        raise DomainError(f'[nu] = {k} is not reached for d = {d}, ell = {ell}')
    a = lo if nu_lo >= k else _r_where_nu(d, ell, k, lo, hi)
    b = hi if nu_hi <= k + 1 else _r_where_nu(d, ell, k + 1, lo, hi)
    return a, b


@dataclass
class RootRecord:
    n: int
    r: mpf
    nu: mpf
    bracket: Tuple[mpf, mpf]
    kappa_star: Optional[mpf] = None
    kappa_zero_found: Optional[bool] = None
    parity_expected: Optional[bool] = None
    accuracy: Optional[Dict] = None

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'r': encode_real(self.r),
            'nu': encode_real(self.nu),
            'bracket': [encode_real(b) for b in self.bracket],
            'kappa_star': None if self.kappa_star is None else encode_real(self.kappa_star),
            'kappa_zero_found': self.kappa_zero_found,
            'parity_expected': self.parity_expected,
            'accuracy': self.accuracy,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'RootRecord':
        return cls(int(data['n']), decode_real(data['r']), decode_real(data['nu']),
                   tuple(decode_real(b) for b in data['bracket']),
                   None if data.get('kappa_star') is None else decode_real(data['kappa_star']),
                   data.get('kappa_zero_found'), data.get('parity_expected'), data.get('accuracy'))


@dataclass
class ScanResult:
    d: int
    ell: mpf
    roots: List[RootRecord] = field(default_factory=list)
    global_numbering: bool = True
    sign_samples: List[Tuple[mpf, mpf]] = field(default_factory=list)
    kappa_samples: List[Tuple[mpf, mpf, mpf]] = field(default_factory=list)

    @property
    def r_n_list(self) -> List[mpf]:
        return [root.r for root in self.roots]

    def to_dict(self) -> Dict:
        return {
            'd': self.d,
            'ell': encode_real(self.ell),
            'roots': [root.to_dict() for root in self.roots],
            'global_numbering': self.global_numbering,
            'sign_samples': [[encode_real(r), encode_real(c)] for r, c in self.sign_samples],
            'kappa_samples': [[encode_real(x) for x in row] for row in self.kappa_samples],
            'schema_version': SCHEMA_VERSION,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ScanResult':
        check_schema(data, 'scan')
        try:
            out = cls(int(data['d']), decode_real(data['ell']),
                      [RootRecord.from_dict(r) for r in data['roots']],
                      bool(data.get('global_numbering', False)),
                      [(decode_real(r), decode_real(c)) for r, c in data['sign_samples']],
                      [tuple(decode_real(x) for x in row) for row in data.get('kappa_samples', [])])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArtifact(f'scan: malformed payload ({e})') from e
        out.validate()
        return out

    def validate(self):
        rs = self.r_n_list
        if any(a >= b for a, b in zip(rs, rs[1:])):
            raise InvalidArtifact('scan: roots are not increasing in r')
        if [root.n for root in self.roots] != list(range(1, len(self.roots) + 1)):
            raise InvalidArtifact('scan: root indices are not 1, 2, ...')
        if any(root.r <= 1 for root in self.roots):
            raise InvalidArtifact('scan: a root lies at r <= 1')
        if not self.global_numbering and any(root.parity_expected is not None for root in self.roots):
            raise InvalidArtifact('scan: parity bookkeeping on a scan without global root numbering')
        for root in self.roots:
            if root.parity_expected is not None and root.parity_expected != kappa_parity_expected(self.d, root.n):
                raise InvalidArtifact(f'scan: parity of r_{root.n} does not follow d = {self.d}')


def kappa_parity_expected(d: int, n: int) -> bool:
    """Whether a zero of c- is expected at r_n: even n for d >= 3, odd n for d = 2"""
    return n % 2 == (1 if d == 2 else 0)


def c_plus_at(task) -> mpf:
    """c+ of the interior profile at one r; task = (d, ell, r, k, options)"""
    d, ell, r, k, options = task
    params = EulerParams(int(d), to_mpf(ell), to_mpf(r))
    opts = SolverOptions(**{**options.__dict__, 'interior_only': True})
    sol = solve_profile(params, None, opts)
    return extract_c(sol, PLUS, k).c_value


def c_minus_at(task) -> mpf:
    """c- of the full profile at one κ; task = (d, ell, r, kappa, options)"""
    d, ell, r, kappa, options = task
    params = EulerParams(int(d), to_mpf(ell), to_mpf(r), to_mpf(kappa))
    sol = solve_profile(params, None, options)
    return extract_c(sol, MINUS).c_value


def _refine_root(func: Callable[[float], float], a: float, b: float, xtol: float) -> mpf:
    return to_mpf(brentq(func, a, b, xtol=xtol))


def find_r_n(d: int, ell, nu_int_window: Tuple[int, int] = (1, 3), samples: int = 8,
             options: Optional[SolverOptions] = None, xtol: float = R_XTOL,
             workers: int = 1, seed: int = 0, nu_margin=0.05) -> ScanResult:
    """
    Samples c+(r) inside each interval [ν] = k of the window, brackets the sign
    changes and refines them with Brent's method. Root indices follow the
    increasing-r order of the scan.

    The indices are the global r_1 < r_2 < ... only when the window starts at
    [ν] = 1 and no band was skipped on the way; otherwise global_numbering is
    cleared and scan_kappa leaves the parity bookkeeping empty.
    """
    lo_k, hi_k = nu_int_window
    if lo_k < 1 or hi_k > 7 or lo_k > hi_k:
        raise DomainError(f'nu_int_window has to lie within [1, 7], got {nu_int_window}')
    options = options or SolverOptions()
    ell = to_mpf(ell)
    result = ScanResult(int(d), ell, global_numbering=lo_k == 1)
    if lo_k != 1:
        logger.warning(f'window starts at [nu] = {lo_k}: root indices are relative to the window')

    for k in range(lo_k, hi_k + 1):
        try:
            a, b = nu_interval(d, ell, k)
        except DomainError as e:
            logger.warning(str(e))
            result.global_numbering = False
            continue
        ra = _r_where_nu(d, ell, k + nu_margin, a, b) if nu_at(d, ell, a) < k + nu_margin else a
        rb = _r_where_nu(d, ell, k + 1 - nu_margin, a, b) if nu_at(d, ell, b) > k + 1 - nu_margin else b
        rs = [ra + (rb - ra)*i/(samples - 1) for i in range(samples)]
        values = map_samples(c_plus_at, [(d, ell, r, k, options) for r in rs], workers, seed)
        result.sign_samples.extend(zip(rs, values))

        found = False
        for (r0, c0), (r1, c1) in zip(zip(rs, values), zip(rs[1:], values[1:])):
            if c0 == 0 or c0*c1 < 0:
                f = lambda r: float(c_plus_at((d, ell, r, k, options)))
                root = r0 if c0 == 0 else _refine_root(f, float(r0), float(r1), xtol)
                result.roots.append(RootRecord(len(result.roots) + 1, root, nu_at(d, ell, root), (r0, r1)))
                logger.info(f'root r = {mp.nstr(root, 10)} in [nu] = {k}')
                found = True
        if not found:
            logger.warning(str(NoSignChange(f'no sign change of c+ for [nu] = {k}')))
            result.global_numbering = False
    return result


def find_kappa_star(d: int, ell, r_n, samples: int = 12, options: Optional[SolverOptions] = None,
                    xtol: float = R_XTOL, margin: float = 0.02, workers: int = 1, seed: int = 0,
                    record: Optional[ScanResult] = None) -> Optional[mpf]:
    """κ in the admissible window with c-(κ) = 0 at r = r_n, or None without a sign change"""
    options = options or SolverOptions()
    params = EulerParams(int(d), to_mpf(ell), to_mpf(r_n))
    k_lo, k_hi = admissible_kappa_window(params)
    width = k_hi - k_lo
    k_lo, k_hi = k_lo + margin*width, k_hi - margin*width
    kappas = [k_lo + (k_hi - k_lo)*i/(samples - 1) for i in range(samples)]
    values = map_samples(c_minus_at, [(d, ell, r_n, kappa, options) for kappa in kappas], workers, seed)
    if record is not None:
        record.kappa_samples.extend((to_mpf(r_n), kp, c) for kp, c in zip(kappas, values))

    for (k0, c0), (k1, c1) in zip(zip(kappas, values), zip(kappas[1:], values[1:])):
        if c0 == 0:
            return k0
        if c0*c1 < 0:
            f = lambda kp: float(c_minus_at((d, ell, r_n, kp, options)))
            kappa = _refine_root(f, float(k0), float(k1), xtol)
            logger.info(f'kappa* = {mp.nstr(kappa, 10)} at r = {mp.nstr(to_mpf(r_n), 10)}')
            return kappa
    logger.warning(str(NoSignChange(f'no sign change of c- at r = {mp.nstr(to_mpf(r_n), 10)}')))
    return None


def scan_kappa(result: ScanResult, samples: int = 12, options: Optional[SolverOptions] = None,
               workers: int = 1, seed: int = 0) -> ScanResult:
    """Fills κ*, the parity bookkeeping and the accuracy metrics of every root"""
    options = options or SolverOptions()
    for root in result.roots:
        root.kappa_star = find_kappa_star(result.d, result.ell, root.r, samples, options,
                                          workers=workers, seed=seed, record=result)
        root.kappa_zero_found = root.kappa_star is not None
        root.parity_expected = kappa_parity_expected(result.d, root.n) if result.global_numbering else None
        if root.kappa_star is not None:
            params = EulerParams(result.d, result.ell, root.r, root.kappa_star)
            sol = solve_profile(params, None, options)
            root.accuracy = smoothness_report(sol, PLUS)
    return result
