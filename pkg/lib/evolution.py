"""
Nonlinear evolution of (ρ̂, û) in self-similar time τ:

  ∂τ ρ̂ = -[ℓ(r-1)ρ̂ + Zρ̂' + (ρ̂û)' + (d-1)ρ̂û/Z]
  ∂τ û = -[(r-1)û + Zû' + ûû' + (ρ̂^(γ-1))']

Uniform X grid mapped to Z, 6th-order finite differences in X (one-sided next
to Zcut, parity ghosts left of Z = 0), classical RK4 and an 8th-difference
filter after every step.
"""
# standard library
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import logging

# third-party libraries
import numpy as np
from mpmath import mp

# local
from lib.errors import DomainError, PositivityLoss
from lib.mode_solver import omega_bounds
from lib.phase_core import EulerParams
from lib.standard_column_order import DIAGNOSTIC_COLUMNS
from lib.profile_solver import emden_to_physical


logger = logging.getLogger(__name__)

GHOSTS = 4
HALF_STENCIL = 3
EDGE_STENCIL = 8
GHOST_NODES = 8
DTYPES = {'float64': np.float64, 'extended': np.longdouble}

POSITIVITY_LOSS = 'positivity_loss'
RAMP = 'ramp'
DEVIATION = 'deviation'
TAU_MAX = 'tau_max'
MAX_STEPS = 'max_steps'
CONTINUE = 'continue'
STOP = 'stop'



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                   MAPPED GRID                   #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class MappedGrid:
    """
    Z(X) = C((1-a)(2X/(Zcut+s) - 1)^q + 2aX/(Zcut+s) + (1-a)) on X in [0, Zcut],
    s being the offset of the plateau at X = (Zcut+s)/2 where Z = C.
    """
    Zcut: float
    n_points: int
    a: float = 1.0
    q: int = 3
    grid_shift: float = 0.0
    dtype: type = np.float64
    C: float = field(init=False)
    h: float = field(init=False)
    X: np.ndarray = field(init=False, repr=False)
    Z: np.ndarray = field(init=False, repr=False)
    Z_X: np.ndarray = field(init=False, repr=False)
    Z_XX: np.ndarray = field(init=False, repr=False)
    Z_ghost: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Zc, s, a, q = self.Zcut, self.grid_shift, self.a, self.q
        if Zc <= 0:
            raise DomainError(f'Zcut has to be positive, got {Zc}')
        if not 0 < a <= 1:
            raise DomainError(f'a has to lie in (0, 1], got {a}')
        if q < 1 or q % 2 == 0:
            raise DomainError(f'q has to be an odd positive integer, got {q}')
        if not -Zc < s < Zc:
            raise DomainError(f'grid shift has to lie in (-Zcut, Zcut), got {s}')
        if self.n_points < 2*EDGE_STENCIL:
            raise DomainError(f'n_points has to be at least {2*EDGE_STENCIL}, got {self.n_points}')
        self.C = Zc*(Zc + s)**q/(2*a*Zc*(Zc + s)**(q - 1) + (1 - a)*(Zc - s)**q + (1 - a)*(Zc + s)**q)
        self.h = Zc/(self.n_points - 1)
        self.X = np.arange(self.n_points, dtype=self.dtype)*self.dtype(self.h)
        self.Z, self.Z_X, self.Z_XX = self.map(self.X)
        self.Z[0] = 0
        self.Z[-1] = Zc
        self.Z_ghost = self.map(-np.arange(1, GHOSTS + 1, dtype=self.dtype)*self.dtype(self.h))[0]

    def map(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Z, dZ/dX, d²Z/dX²) at X"""
        Zc, s, a, q, C = self.Zcut, self.grid_shift, self.a, self.q, self.C
        k = 2/(Zc + s)
        t = k*X - 1
        Z = C*((1 - a)*t**q + a*k*X + (1 - a))
        Z_X = C*((1 - a)*q*k*t**(q - 1) + a*k)
        Z_XX = C*(1 - a)*q*(q - 1)*k**2*t**(q - 2) if q > 1 else np.zeros_like(X)
        return Z, Z_X, Z_XX

    @property
    def dZ(self) -> np.ndarray:
        return np.diff(self.Z)


def make_mapped_grid(Zcut: float, n: int, a: float = 1.0, q: int = 3, shift: float = 0.0,
                     precision: str = 'float64') -> MappedGrid:
    if precision not in DTYPES:
        raise DomainError(f'unknown evolution precision "{precision}", expected one of {list(DTYPES)}')
    return MappedGrid(float(Zcut), int(n), float(a), int(q), float(shift), DTYPES[precision])



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#               FINITE DIFFERENCES                #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@lru_cache(maxsize=None)
def fd_weights(offsets: Tuple[int, ...], derivative: int) -> Tuple[Fraction, ...]:
    """Exact weights of d^m/dx^m at 0 on the integer stencil `offsets` (Fornberg)"""
    x = [Fraction(o) for o in offsets]
    n, m = len(x), derivative
    if m >= n:
        raise DomainError(f'a stencil of {n} points cannot resolve derivative {m}')
    c = [[Fraction(0)]*(m + 1) for _ in range(n)]
    c[0][0] = Fraction(1)
    c1, c4 = Fraction(1), x[0]
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = Fraction(1), c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i][k] = c1*(k*c[i - 1][k - 1] - c5*c[i - 1][k])/c2
                c[i][0] = -c1*c5*c[i - 1][0]/c2
            for k in range(mn, 0, -1):
                c[j][k] = (c4*c[j][k] - k*c[j][k - 1])/c3
            c[j][0] = c4*c[j][0]/c3
        c1 = c2
    return tuple(c[i][m] for i in range(n))


def _lagrange_weights(nodes: np.ndarray, z: float) -> np.ndarray:
    w = np.ones(len(nodes))
    for i, xi in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if i != j:
                w[i] *= (z - xj)/(xi - xj)
    return w


@lru_cache(maxsize=16)
def _ghost_matrices(grid_key: Tuple) -> Tuple[np.ndarray, np.ndarray]:
    """(even, odd) maps from f(Z_0..Z_7) to the ghost values over the mirrored node set"""
    Z_pos, Z_ghost = (np.array(v) for v in grid_key)
    nodes = np.concatenate([-Z_pos[:0:-1], Z_pos])
    k = len(Z_pos) - 1
    even = np.zeros((len(Z_ghost), len(Z_pos)))
    odd = np.zeros((len(Z_ghost), len(Z_pos)))
    for g, z in enumerate(Z_ghost):
        L = _lagrange_weights(nodes, z)
        plus, minus = L[k:], L[k::-1]
        even[g] = plus + minus
        odd[g] = plus - minus
        even[g, 0] = L[k]
        odd[g, 0] = 0
    return even, odd


def extend_with_ghosts(f: np.ndarray, grid: MappedGrid, parity: int) -> np.ndarray:
    """Prepends GHOSTS values (nearest to Z = 0 last) by the parity of f: +1 even, -1 odd"""
    key = (tuple(float(z) for z in grid.Z[:GHOST_NODES]), tuple(float(z) for z in grid.Z_ghost))
    even, odd = _ghost_matrices(key)
    ghosts = (even if parity > 0 else odd).dot(f[:GHOST_NODES].astype(float)).astype(f.dtype)
    return np.concatenate([ghosts[::-1], f])


def _x_derivative(fe: np.ndarray, n: int, derivative: int) -> np.ndarray:
    """d^m/dX^m times h^m on an array carrying GHOSTS leading values"""
    out = np.zeros(n, dtype=fe.dtype)
    offsets = tuple(range(-HALF_STENCIL, HALF_STENCIL + 1))
    m = n - HALF_STENCIL
    for o, w in zip(offsets, fd_weights(offsets, derivative)):
        out[:m] += float(w)*fe[GHOSTS + o:GHOSTS + o + m]
    for i in range(m, n):
        edge = tuple(j - i for j in range(n - EDGE_STENCIL, n))
        row = fe[GHOSTS + n - EDGE_STENCIL:GHOSTS + n]
        out[i] = sum(float(w)*v for w, v in zip(fd_weights(edge, derivative), row))
    return out


def spatial_derivatives(rho: np.ndarray, u: np.ndarray, grid: MappedGrid, second: bool = True) -> Dict[str, np.ndarray]:
    """ρ̂', û' and optionally ρ̂'', û'' in Z; ρ̂ is extended as an even function, û as an odd one"""
    n, h = grid.n_points, grid.h
    out = {}
    for name, f, parity in (('rho', rho, 1), ('u', u, -1)):
        fe = extend_with_ghosts(f, grid, parity)
        f_Z = _x_derivative(fe, n, 1)/(h*grid.Z_X)
        out[f'{name}_Z'] = f_Z
        if second:
            f_XX = _x_derivative(fe, n, 2)/h**2
            out[f'{name}_ZZ'] = (f_XX - grid.Z_XX*f_Z)/grid.Z_X**2
    return out


def dissipation(f: np.ndarray, grid: MappedGrid, amplitude: float, parity: int) -> np.ndarray:
    """-A/2^8 δ^8 f on nodes with a full stencil; zero on the last GHOSTS nodes"""
    out = np.zeros_like(f)
    if amplitude == 0:
        return out
    fe = extend_with_ghosts(f, grid, parity)
    offsets = tuple(range(-GHOSTS, GHOSTS + 1))
    m = grid.n_points - GHOSTS
    for o, w in zip(offsets, fd_weights(offsets, 2*GHOSTS)):
        out[:m] += float(w)*fe[GHOSTS + o:GHOSTS + o + m]
    return -amplitude/2**(2*GHOSTS)*out



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                  TIME STEPPING                  #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class EvolutionControls:
    Zcut: float = 750.0
    n_points: int = 2**14
    a: float = 1.0
    q: int = 3
    grid_shift: float = 0.0
    dt0: Optional[float] = None
    cfl: float = 0.25
    dissipation: float = 1e-3
    tau_max: float = 10.0
    ramp_factor: float = 10.0
    resolution_bound: float = 0.5
    snapshot_every: int = 0
    max_steps: int = 10**7
    precision: str = 'float64'


@dataclass
class EvolutionState:
    tau: float
    rho: np.ndarray
    u: np.ndarray
    dtau_history: List[float] = field(default_factory=list)
    controls: Optional[EvolutionControls] = None


def rhs(rho: np.ndarray, u: np.ndarray, grid: MappedGrid, params: EulerParams,
        derivs: Optional[Dict[str, np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(∂τ ρ̂, ∂τ û); (d-1)ρ̂û/Z is replaced by (d-1)ρ̂ û'(0) at Z = 0"""
    bad = np.flatnonzero(rho <= 0)
    if len(bad):
        raise PositivityLoss(f'rho <= 0 at {len(bad)} nodes, first at Z = {float(grid.Z[bad[0]]):.6g}',
                             float(grid.Z[bad[0]]))
    d, ell, r, gamma = int(params.d), float(params.ell), float(params.r), float(params.gamma)
    D = derivs if derivs is not None else spatial_derivatives(rho, u, grid, second=False)
    rho_Z, u_Z = D['rho_Z'], D['u_Z']
    Z = grid.Z
    u_over_Z = np.empty_like(u)
    u_over_Z[1:] = u[1:]/Z[1:]
    u_over_Z[0] = u_Z[0]
    d_rho = -(ell*(r - 1)*rho + Z*rho_Z + rho_Z*u + rho*u_Z + (d - 1)*rho*u_over_Z)
    d_u = -((r - 1)*u + Z*u_Z + u*u_Z + (gamma - 1)*rho**(gamma - 2)*rho_Z)
    d_u[0] = 0
    return d_rho, d_u


def rk4_step(state: EvolutionState, dt: float, grid: MappedGrid, params: EulerParams,
             amplitude: float = 0.0, dt0: Optional[float] = None) -> EvolutionState:
    """Classical RK4, then the 8th-difference filter with strength amplitude·dt/dt0"""
    rho, u = state.rho, state.u
    k1 = rhs(rho, u, grid, params)
    k2 = rhs(rho + 0.5*dt*k1[0], u + 0.5*dt*k1[1], grid, params)
    k3 = rhs(rho + 0.5*dt*k2[0], u + 0.5*dt*k2[1], grid, params)
    k4 = rhs(rho + dt*k3[0], u + dt*k3[1], grid, params)
    rho_new = rho + dt*(k1[0] + 2*k2[0] + 2*k3[0] + k4[0])/6
    u_new = u + dt*(k1[1] + 2*k2[1] + 2*k3[1] + k4[1])/6
    if amplitude:
        strength = amplitude*(dt/dt0 if dt0 else 1.0)
        rho_new = rho_new + dissipation(rho_new, grid, strength, 1)
        u_new = u_new + dissipation(u_new, grid, strength, -1)
    u_new[0] = 0
    state.dtau_history.append(dt)
    return EvolutionState(state.tau + dt, rho_new, u_new, state.dtau_history, state.controls)


def adaptive_dt(grad0: float, grad: float, dt0: float) -> float:
    """Δτ = min(1, max|ρ̂'(0)| / max|ρ̂'(τ)|)·Δτ0"""
    if grad <= 0:
        return dt0
    return min(1.0, grad0/grad)*dt0


def cfl_dt(rho: np.ndarray, u: np.ndarray, grid: MappedGrid, params: EulerParams, cfl: float) -> float:
    """cfl·min ΔZ over the fastest characteristic |Z + û| + c, c² = (γ-1)ρ̂^(γ-1)"""
    gamma = float(params.gamma)
    c = np.sqrt((gamma - 1)*rho**(gamma - 1))
    speed = float(np.max(np.abs(grid.Z + u) + c))
    return cfl*float(np.min(grid.dZ))/speed


def estimate_noise(rho0: np.ndarray, u0: np.ndarray, grid: MappedGrid, params: EulerParams) -> float:
    """Residual floor of the discretized static profile"""
    d_rho, d_u = rhs(rho0, u0, grid, params)
    floor = float(np.finfo(grid.dtype).eps)
    return max(float(np.max(np.abs(d_rho))), float(np.max(np.abs(d_u))), floor)


def ramp_monitor(signal: float, tau: float, eps_noise: float, Omega_max: float, factor: float = 10.0) -> str:
    """Stops once the signal is within `factor` of the line ε_noise·e^(Ω_max τ)"""
    ramp = eps_noise*np.exp(Omega_max*tau)
    return STOP if factor*ramp >= abs(signal) else CONTINUE



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                   DIAGNOSTICS                   #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

@dataclass
class ShockDiagnostics:
    records: Dict[str, List[float]] = field(default_factory=lambda: {c: [] for c in DIAGNOSTIC_COLUMNS})
    eps_noise: Optional[float] = None
    stop_reason: Optional[str] = None
    stop_tau: Optional[float] = None
    fits: Dict[str, Dict] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records['tau'])

    def append(self, row: Dict[str, float]):
        for c in DIAGNOSTIC_COLUMNS:
            self.records[c].append(float(row[c]))

    def column(self, name: str) -> np.ndarray:
        return np.array(self.records[name])

    def rows(self) -> List[List[float]]:
        return [list(r) for r in zip(*(self.records[c] for c in DIAGNOSTIC_COLUMNS))]


def measure(state: EvolutionState, grid: MappedGrid, rho0: np.ndarray, dt: float) -> Dict[str, float]:
    D = spatial_derivatives(state.rho, state.u, grid)
    Z = grid.Z
    i_rz = int(np.argmax(D['rho_Z']))
    i_uz = int(np.argmin(D['u_Z']))
    i_rzz_max, i_rzz_min = int(np.argmax(D['rho_ZZ'])), int(np.argmin(D['rho_ZZ']))
    i_uzz_max, i_uzz_min = int(np.argmax(D['u_ZZ'])), int(np.argmin(D['u_ZZ']))
    grad = float(np.max(np.abs(D['rho_Z'])))
    i_grad = int(np.argmax(np.abs(D['rho_Z'])))
    dZ_local = float(grid.dZ[min(i_grad, grid.n_points - 2)])
    resolution = float(np.max(np.abs(D['rho_ZZ'])))*dZ_local/grad if grad > 0 else 0.0
    return {
        'tau': state.tau, 'dtau': dt,
        'perturbation': float(np.max(np.abs(state.rho - rho0))),
        'max_rho_Z': D['rho_Z'][i_rz], 'Z_max_rho_Z': Z[i_rz],
        'min_u_Z': D['u_Z'][i_uz], 'Z_min_u_Z': Z[i_uz],
        'max_rho_ZZ': D['rho_ZZ'][i_rzz_max], 'Z_max_rho_ZZ': Z[i_rzz_max],
        'min_rho_ZZ': D['rho_ZZ'][i_rzz_min], 'Z_min_rho_ZZ': Z[i_rzz_min],
        'max_u_ZZ': D['u_ZZ'][i_uzz_max], 'Z_max_u_ZZ': Z[i_uzz_max],
        'min_u_ZZ': D['u_ZZ'][i_uzz_min], 'Z_min_u_ZZ': Z[i_uzz_min],
        'delta_Z': abs(Z[i_rzz_max] - Z[i_rzz_min]),
        'resolution': resolution,
    }


def _max_grad(rho: np.ndarray, u: np.ndarray, grid: MappedGrid) -> float:
    return float(np.max(np.abs(spatial_derivatives(rho, u, grid, second=False)['rho_Z'])))



# # # # # # # # # # # # # # # # # # # # # # # # # #
#                                                 #
#                     DRIVER                      #
#                                                 #
# # # # # # # # # # # # # # # # # # # # # # # # # #

def sample_fields(Z: Sequence, rho_of: Callable, u_of: Callable, dtype=np.float64) -> Tuple[np.ndarray, np.ndarray]:
    rho = np.array([float(rho_of(z)) for z in Z], dtype=dtype)
    u = np.array([float(u_of(z)) for z in Z], dtype=dtype)
    u[0] = 0
    return rho, u


def initial_data(profile, mode, epsilon: float, grid: MappedGrid):
    """
    (ρ̂0, û0) and (ρ̂0 + εα, û0 + εβ) resampled from the profile and mode
    evaluators onto the grid.
    """
    phys = emden_to_physical(profile)
    with mp.workdps(max(20, mp.dps//2)):
        rho0, u0 = sample_fields(grid.Z, phys.rho, phys.u, grid.dtype)
        if mode is None:
            return rho0, u0, rho0.copy(), u0.copy()
        alpha, beta = sample_fields(grid.Z, lambda z: mode.evaluate(z)[0], lambda z: mode.evaluate(z)[1], grid.dtype)
    return rho0, u0, rho0 + epsilon*alpha, u0 + epsilon*beta


@dataclass
class EvolutionResult:
    state: EvolutionState
    diagnostics: ShockDiagnostics
    snapshots: List[Tuple[float, np.ndarray, np.ndarray]]
    grid: MappedGrid
    steps: int


def evolve_fields(rho0: np.ndarray, u0: np.ndarray, rho: np.ndarray, u: np.ndarray, grid: MappedGrid,
                  params: EulerParams, Omega_max: Optional[float], controls: EvolutionControls) -> EvolutionResult:
    """
    Runs from (ρ̂, û) until τ_max or a stop; precedence PositivityLoss > ramp >
    resolution deviation > τ_max. The static (ρ̂0, û0) sets ε_noise and the
    perturbation measure.
    """
    diag = ShockDiagnostics()
    diag.eps_noise = estimate_noise(rho0, u0, grid, params)
    dt0 = controls.dt0 or cfl_dt(rho, u, grid, params, controls.cfl)
    grad0 = _max_grad(rho, u, grid)
    state = EvolutionState(0.0, rho, u, [], controls)
    snapshots = [(0.0, rho.copy(), u.copy())] if controls.snapshot_every else []
    logger.info(f'evolution: n = {grid.n_points}, dt0 = {dt0:.3e}, eps_noise = {diag.eps_noise:.3e}')

    steps = 0
    diag.append(measure(state, grid, rho0, 0.0))
    while True:
        if state.tau >= controls.tau_max:
            diag.stop_reason = TAU_MAX
            break
        if steps >= controls.max_steps:
            diag.stop_reason = MAX_STEPS
            break
        dt = adaptive_dt(grad0, _max_grad(state.rho, state.u, grid), dt0)
        dt = min(dt, controls.tau_max - state.tau)
        try:
            state = rk4_step(state, dt, grid, params, controls.dissipation, dt0)
        except PositivityLoss as e:
            logger.warning(f'tau = {state.tau:.6g}: {e}')
            diag.stop_reason = POSITIVITY_LOSS
            break
        steps += 1
        row = measure(state, grid, rho0, dt)
        diag.append(row)
        if controls.snapshot_every and steps % controls.snapshot_every == 0:
            snapshots.append((state.tau, state.rho.copy(), state.u.copy()))
        if Omega_max is not None and ramp_monitor(row['perturbation'], state.tau, diag.eps_noise,
                                                  Omega_max, controls.ramp_factor) == STOP:
            diag.stop_reason = RAMP
            break
        if row['resolution'] > controls.resolution_bound:
            diag.stop_reason = DEVIATION
            break
        if steps % 1000 == 0:
            logger.debug(f'step {steps}: tau = {state.tau:.6g}, max rho_Z = {row["max_rho_Z"]:.6g}')

    diag.stop_tau = state.tau
    logger.info(f'evolution stopped ({diag.stop_reason}) at tau = {state.tau:.6g} after {steps} steps')
    return EvolutionResult(state, diag, snapshots, grid, steps)


def evolve(profile, mode, epsilon: float, controls: Optional[EvolutionControls] = None,
           Omega_max: Optional[float] = None) -> EvolutionResult:
    """Profile + ε·mode on the mapped grid; Ω_max defaults to the mode-solver bound"""
    controls = controls or EvolutionControls()
    if mode is not None:
        values = list(mode.alpha1) + ([] if mode.alpha2 is None else list(mode.alpha2))
        if abs(max(values) - 1) > 1e-12 or not abs(min(values)) < 1:
            raise DomainError('mode has to be normalized with max alpha = 1 > |min alpha|')
    grid = make_mapped_grid(controls.Zcut, controls.n_points, controls.a, controls.q,
                            controls.grid_shift, controls.precision)
    if Omega_max is None:
        Omega_max = float(omega_bounds(profile.params)[1])
    rho0, u0, rho, u = initial_data(profile, mode, epsilon, grid)
    return evolve_fields(rho0, u0, rho, u, grid, profile.params, Omega_max, controls)
