# standard library
from dataclasses import dataclass, asdict, field
from typing import Dict, Optional, Sequence, Tuple
import logging

# third-party libraries
import numpy as np
from scipy.optimize import curve_fit, minimize_scalar

# local
from lib.errors import FitFailed, InvalidArtifact
from lib.evolution import DEVIATION, MAX_STEPS, POSITIVITY_LOSS, RAMP, TAU_MAX, ShockDiagnostics
from lib.math_utils import t_score_two_tailed
from lib.phase_core import SCHEMA_VERSION, check_schema


logger = logging.getLogger(__name__)

MIN_SAMPLES = 20
DEVIATION_THRESHOLD = 0.05
CONFIDENCE = 0.95
TRACKED = ('max_rho_Z', 'min_u_Z', 'max_rho_ZZ', 'min_rho_ZZ', 'max_u_ZZ', 'min_u_ZZ')
STOP_REASONS = (POSITIVITY_LOSS, RAMP, DEVIATION, TAU_MAX, MAX_STEPS)



@dataclass
class ShockFit:
    quantity: str
    c: float
    tau_star: float
    s: float
    tau_star_ci: Tuple[float, float]
    s_ci: Tuple[float, float]
    window: Tuple[float, float]
    n_samples: int
    deviation_onset: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'ShockFit':
        try:
            fit = cls(str(data['quantity']), float(data['c']), float(data['tau_star']), float(data['s']),
                      _pair(data['tau_star_ci']), _pair(data['s_ci']), _pair(data['window']),
                      int(data['n_samples']),
                      None if data.get('deviation_onset') is None else float(data['deviation_onset']))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArtifact(f'shock fit: malformed payload ({e})') from e
        fit.validate()
        return fit

    def validate(self):
        def fail(message):
            raise InvalidArtifact(f'shock fit of {self.quantity}: {message}')

        if self.quantity not in TRACKED:
            fail('not a tracked quantity')
        if self.n_samples < MIN_SAMPLES:
            fail(f'{self.n_samples} samples, at least {MIN_SAMPLES} needed')
        if not (np.isfinite(self.tau_star) and np.isfinite(self.s)) or self.s < 0:
            fail(f'tau* = {self.tau_star}, s = {self.s}')
        if self.tau_star <= self.window[1]:
            fail('tau* lies inside the fitted window')
        for name, value, (lo, hi) in (('tau*', self.tau_star, self.tau_star_ci), ('s', self.s, self.s_ci)):
            if not lo <= value <= hi:
                fail(f'{name} = {value} outside its interval [{lo}, {hi}]')


def _pair(values) -> Tuple[float, float]:
    lo, hi = values
    return float(lo), float(hi)


@dataclass
class BlowUpReport:
    """Stored outcome of one evolution run; `profile` and `mode` are archive digests"""
    profile: str
    mode: Optional[str]
    epsilon: float
    stop_reason: str
    stop_tau: Optional[float]
    steps: int
    eps_noise: Optional[float]
    fits: Dict[str, ShockFit] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        out = asdict(self)
        out['fits'] = {k: v.to_dict() for k, v in self.fits.items()}
        out['schema_version'] = SCHEMA_VERSION
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> 'BlowUpReport':
        check_schema(data, 'report')
        opt_float = lambda key: None if data.get(key) is None else float(data[key])
        try:
            fits = data['fits']
            if not isinstance(fits, dict):
                raise TypeError(f'fits has to be an object, got {type(fits).__name__}')
            report = cls(str(data['profile']), None if data.get('mode') is None else str(data['mode']),
                         float(data['epsilon']), data['stop_reason'], opt_float('stop_tau'), int(data['steps']),
                         opt_float('eps_noise'), {k: ShockFit.from_dict(v) for k, v in fits.items()})
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArtifact(f'report: malformed payload ({e})') from e
        report.validate()
        return report

    def validate(self):
        if self.stop_reason not in STOP_REASONS:
            raise InvalidArtifact(f'report: unknown stop reason {self.stop_reason!r}')
        if self.steps < 0:
            raise InvalidArtifact(f'report: {self.steps} steps')
        for name, fit in self.fits.items():
            if fit.quantity != name:
                raise InvalidArtifact(f'report: fit stored under {name} belongs to {fit.quantity}')


def _log_model(tau, log_c, tau_star, s):
    return log_c - s*np.log(tau_star - tau)


def _profile_fit(tau: np.ndarray, log_q: np.ndarray, tau_star: float) -> Tuple[float, float, float]:
    """Least squares in (log c, s) at fixed τ*; returns (sum of squares, log c, s)"""
    x = np.log(tau_star - tau)
    slope, intercept = np.polyfit(x, log_q, 1)
    res = log_q - (intercept + slope*x)
    return float(res.dot(res)), float(intercept), float(-slope)


def fit_power_law(tau: Sequence[float], q: Sequence[float], quantity: str = '') -> ShockFit:
    """
    q ≈ c(τ* - τ)^(-s): τ* by a bounded 1-D search over the log-log fit,
    then a joint (c, τ*, s) refinement whose covariance gives Student t
    intervals.
    """
    tau = np.asarray(tau, dtype=float)
    q = np.abs(np.asarray(q, dtype=float))
    if len(tau) < MIN_SAMPLES:
        raise FitFailed(f'{quantity}: {len(tau)} samples, at least {MIN_SAMPLES} needed')
    if np.any(q <= 0) or not q[-1] > q[0]:
        raise FitFailed(f'{quantity}: no sustained growth')
    log_q = np.log(q)
    span = tau[-1] - tau[0]
    lo, hi = tau[-1] + 1e-9*span, tau[-1] + 10*span

    res = minimize_scalar(lambda ts: _profile_fit(tau, log_q, ts)[0], bounds=(lo, hi), method='bounded',
                          options={'xatol': 1e-12*span})
    tau_star0 = float(res.x)
    _, log_c0, s0 = _profile_fit(tau, log_q, tau_star0)
    if s0 <= 0:
        raise FitFailed(f'{quantity}: fitted exponent {s0:.3g} is not positive')

    try:
        popt, pcov = curve_fit(_log_model, tau, log_q, p0=(log_c0, tau_star0, s0),
                               bounds=([-np.inf, lo, 0], [np.inf, np.inf, np.inf]),
                               ftol=1e-15, xtol=1e-15, gtol=1e-15)
    except (RuntimeError, ValueError) as e:
        raise FitFailed(f'{quantity}: {e}')
    log_c, tau_star, s = (float(v) for v in popt)
    dof = max(len(tau) - 3, 1)
    err = np.sqrt(np.abs(np.diag(pcov))) if np.all(np.isfinite(pcov)) else np.zeros(3)
    t = t_score_two_tailed(CONFIDENCE, dof)
    return ShockFit(quantity, float(np.exp(log_c)), tau_star, s,
                    (tau_star - t*err[1], tau_star + t*err[1]), (s - t*err[2], s + t*err[2]),
                    (float(tau[0]), float(tau[-1])), len(tau))


def _relative_residual(fit: ShockFit, tau: np.ndarray, q: np.ndarray) -> np.ndarray:
    with np.errstate(invalid='ignore', divide='ignore'):
        model = fit.c*(fit.tau_star - tau)**(-fit.s)
    out = np.abs(model - q)/q
    out[~np.isfinite(out)] = np.inf
    return out


def shock_fit(diag: ShockDiagnostics, quantity: str, threshold: float = DEVIATION_THRESHOLD) -> ShockFit:
    """
    Fit over the growth phase of one tracked quantity. Trailing samples are
    dropped in steps of a tenth until the fit stays within `threshold` relative
    residual; the deviation onset is the first later sample beyond it.
    """
    tau_all = diag.column('tau')
    q_all = np.abs(diag.column(quantity))
    start = int(np.argmin(q_all))
    tau, q = tau_all[start:], q_all[start:]
    n = len(tau)

    while True:
        fit = fit_power_law(tau[:n], q[:n], quantity)
        if np.max(_relative_residual(fit, tau[:n], q[:n])) <= threshold or n <= MIN_SAMPLES:
            break
        n = max(MIN_SAMPLES, n - max(1, n//10))

    later = _relative_residual(fit, tau[n:], q[n:])
    above = np.flatnonzero(later > threshold)
    fit.deviation_onset = float(tau[n + above[0]]) if len(above) else None
    logger.info(f'{quantity}: tau* = {fit.tau_star:.5g}, s = {fit.s:.4g} over {fit.n_samples} samples')
    return fit


def fit_all(diag: ShockDiagnostics, quantities: Sequence[str] = TRACKED) -> Dict[str, ShockFit]:
    fits = {}
    for name in quantities:
        try:
            fits[name] = shock_fit(diag, name)
        except FitFailed as e:
            logger.warning(str(e))
    diag.fits = {k: v.to_dict() for k, v in fits.items()}
    return fits
