"""
Run configuration: a JSON file (see sample/config.example.json), then
`section.key=value` overrides, then validation. Every run directory receives
the frozen result as effective_config.json.
"""
# standard library
from dataclasses import dataclass, field, fields, asdict, is_dataclass
from typing import Dict, List, Optional, Sequence, Union
import json
import os

# local
from lib.errors import ConfigError, UnsupportedFileType
from lib.evolution import DTYPES, EvolutionControls
from lib.file import write_json, read_json
from lib.phase_core import EulerParams
from lib.profile_solver import SolverOptions
from lib.arith import to_mpf


EFFECTIVE_CONFIG_FILENAME = 'effective_config.json'
COMMANDS = ('profile', 'scan-r', 'scan-kappa', 'modes', 'evolve', 'verify')
Number = Union[int, float, str]



@dataclass
class ParamsConfig:
    d: int = 3
    ell: Number = 2
    r: Number = 1.2
    kappa: Optional[Number] = 0.6


@dataclass
class SolverConfig:
    N1: int = 96
    N2: int = 96
    dps: Optional[int] = None
    tol: Optional[Number] = None
    max_iter: int = 50
    Zp2_factor: Number = 20
    clustering: Number = 3
    k_cut: int = 10
    n_terms: int = 12


@dataclass
class ScanConfig:
    nu_int_window: List[int] = field(default_factory=lambda: [1, 3])
    r_samples: int = 8
    kappa_samples: int = 12
    xtol: float = 1e-7


@dataclass
class ModesConfig:
    Omega_samples: int = 40
    theta_samples: int = 13
    margin: float = 0.1
    zero_mode_Omega: Optional[Number] = None


@dataclass
class EvolutionConfig:
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
    epsilon: float = 1e-2
    mode: str = 'zero'
    Omega: Number = 0.5


@dataclass
class RunConfig:
    command: str = 'profile'
    params: ParamsConfig = field(default_factory=ParamsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    modes: ModesConfig = field(default_factory=ModesConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    out: str = 'runs'
    seed: int = 0
    workers: int = 1
    verify_level: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)

    def euler_params(self) -> EulerParams:
        p = self.params
        return EulerParams.create(p.d, p.ell, p.r, p.kappa)

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(N1=s.N1, N2=s.N2, tol=None if s.tol is None else to_mpf(s.tol),
                             max_iter=s.max_iter, Zp2_factor=to_mpf(s.Zp2_factor),
                             clustering=to_mpf(s.clustering), k_cut=s.k_cut, n_terms=s.n_terms)

    def evolution_controls(self) -> EvolutionControls:
        e = self.evolution
        return EvolutionControls(**{f.name: getattr(e, f.name) for f in fields(EvolutionControls)})



##### parsing #####

def _coerce(value, default, where: str, numeric: bool = False):
    if value is None:
        return value
    if numeric:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f'{where}: expected a number, got {value!r}')
        return value
    if default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f'{where}: expected true/false, got {value!r}')
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f'{where}: expected an integer, got {value!r}')
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f'{where}: expected a number, got {value!r}')
        return float(value)
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f'{where}: expected a list, got {value!r}')
    return value


def _fill(obj, raw: Dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f'{where or "config"}: expected an object, got {raw!r}')
    known = {f.name: f for f in fields(obj)}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f'unknown config key "{where + "." if where else ""}{key}"')
        current = getattr(obj, key)
        path = f'{where}.{key}' if where else key
        if is_dataclass(current):
            _fill(current, value, path)
        else:
            numeric = known[key].type in (Number, Optional[Number])
            setattr(obj, key, _coerce(value, current, path, numeric))


def parse_override(text: str):
    """'section.key=value' with a JSON value, bare strings allowed"""
    if '=' not in text:
        raise ConfigError(f'override "{text}" has to look like section.key=value')
    path, value = text.split('=', 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    raw: Dict = {}
    node = raw
    keys = path.strip().split('.')
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = parsed
    return raw


def validate(config: RunConfig) -> RunConfig:
    if config.command not in COMMANDS:
        raise ConfigError(f'unknown command "{config.command}", expected one of {list(COMMANDS)}')
    p, s, e = config.params, config.solver, config.evolution
    if not isinstance(p.d, int) or p.d < 1:
        raise ConfigError(f'params.d has to be a positive integer, got {p.d!r}')
    for name in ('ell', 'r'):
        try:
            to_mpf(getattr(p, name))
        except (TypeError, ValueError):
            raise ConfigError(f'params.{name} is not a number: {getattr(p, name)!r}')
    if s.N1 < 8 or s.N2 < 8:
        raise ConfigError(f'solver.N1 and solver.N2 have to be at least 8, got {s.N1}, {s.N2}')
    if s.dps is not None and s.dps < 15:
        raise ConfigError(f'solver.dps has to be at least 15, got {s.dps}')
    if len(config.scan.nu_int_window) != 2:
        raise ConfigError(f'scan.nu_int_window has to hold two integers, got {config.scan.nu_int_window}')
    if e.precision not in DTYPES:
        raise ConfigError(f'evolution.precision has to be one of {list(DTYPES)}, got "{e.precision}"')
    if e.mode not in ('zero', 'smooth', 'none'):
        raise ConfigError(f'evolution.mode has to be "zero", "smooth" or "none", got "{e.mode}"')
    if config.workers < 1:
        raise ConfigError(f'workers has to be at least 1, got {config.workers}')
    if config.verify_level not in (0, 1, 2, 3):
        raise ConfigError(f'verify_level has to be 0..3, got {config.verify_level}')
    return config


def _prune(raw: Dict) -> Dict:
    out = {}
    for k, v in raw.items():
        if isinstance(v, dict):
            v = _prune(v)
            if v:
                out[k] = v
        elif v is not None:
            out[k] = v
    return out


def build_config(command: str, path: Optional[str] = None, overrides: Sequence[str] = (),
                 flags: Optional[Dict] = None) -> RunConfig:
    """Defaults < config file < overrides < explicit flags"""
    config = RunConfig(command=command)
    if path is not None:
        try:
            _fill(config, read_json(path), '')
        except (OSError, EOFError, UnicodeDecodeError, json.JSONDecodeError, UnsupportedFileType) as e:
            raise ConfigError(f'cannot read config "{path}": {e}') from e
    for text in overrides:
        _fill(config, parse_override(text), '')
    if flags:
        _fill(config, _prune(flags), '')
    config.command = command
    return validate(config)


def freeze(config: RunConfig, run_dir: str) -> str:
    os.makedirs(run_dir, exist_ok=True)
    path = os.path.join(run_dir, EFFECTIVE_CONFIG_FILENAME)
    write_json(path, config.to_dict())
    return path
