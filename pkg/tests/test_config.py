import gzip
import json

import pytest
from mpmath import mpf

from lib.config import EFFECTIVE_CONFIG_FILENAME, build_config, freeze, parse_override
from lib.errors import ConfigError
from lib.evolution import EvolutionControls
from lib.file import read_json


def test_defaults():
    config = build_config('profile')
    assert config.params.d == 3
    assert config.params.ell == 2
    assert config.out == 'runs'
    assert config.euler_params().kappa == mpf('0.6')


def test_parse_override_reads_json_values():
    assert parse_override('evolution.epsilon=-1e-2') == {'evolution': {'epsilon': -0.01}}
    assert parse_override('evolution.mode=smooth') == {'evolution': {'mode': 'smooth'}}
    assert parse_override('scan.nu_int_window=[2,4]') == {'scan': {'nu_int_window': [2, 4]}}
    with pytest.raises(ConfigError):
        parse_override('evolution.epsilon')


def test_file_then_overrides_then_flags(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'params': {'r': '1.3', 'kappa': 0.2}, 'evolution': {'epsilon': 0.05}}))
    config = build_config('evolve', str(path), ['evolution.epsilon=0.02', 'params.r=1.25'],
                          {'params': {'d': None, 'r': '1.28'}, 'workers': None})
    assert config.params.r == '1.28'
    assert config.params.kappa == 0.2
    assert config.evolution.epsilon == 0.02
    assert config.workers == 1
    assert config.command == 'evolve'


def test_numbers_keep_their_spelling():
    config = build_config('profile', overrides=['params.ell=2.5', 'params.r="1.1"'])
    assert config.params.ell == 2.5
    assert config.params.r == '1.1'
    assert str(config.euler_params().r) == '1.1'


@pytest.mark.parametrize('override', [
    'params.foo=1',
    'evolution.precision="quad"',
    'evolution.mode="half"',
    'solver.N1=4',
    'solver.dps=10',
    'params.d=1.5',
    'workers=0',
    'verify_level=5',
    'scan.nu_int_window=[1]',
    'params.ell=true',
])
def test_invalid_configs_are_rejected(override):
    with pytest.raises(ConfigError):
        build_config('profile', overrides=[override])


def test_unknown_command():
    with pytest.raises(ConfigError):
        build_config('plot')


def test_unreadable_config_file(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{not json')
    with pytest.raises(ConfigError):
        build_config('profile', str(path))


def test_gzipped_config_is_read_by_content(tmp_path):
    path = tmp_path / 'run.json'
    with gzip.open(path, 'wt', encoding='utf-8') as f:
        json.dump({'params': {'r': '1.3'}, 'solver': {'dps': 40}}, f)
    config = build_config('profile', str(path), [], {})
    assert config.params.r == '1.3'
    assert config.solver.dps == 40


def test_binary_config_is_a_config_error(tmp_path):
    path = tmp_path / 'run.json'
    path.write_bytes(b'\x00\x01\x02\xff'*100)
    with pytest.raises(ConfigError):
        build_config('profile', str(path), [], {})


def test_evolution_controls_follow_the_config():
    config = build_config('evolve', overrides=['evolution.n_points=4096', 'evolution.precision="extended"'])
    controls = config.evolution_controls()
    assert isinstance(controls, EvolutionControls)
    assert controls.n_points == 4096
    assert controls.precision == 'extended'


def test_freeze_writes_the_effective_config(tmp_path):
    config = build_config('modes', overrides=['modes.zero_mode_Omega=0.5'])
    path = freeze(config, str(tmp_path / 'run'))
    assert path.endswith(EFFECTIVE_CONFIG_FILENAME)
    frozen = read_json(path)
    assert frozen['command'] == 'modes'
    assert frozen['modes']['zero_mode_Omega'] == 0.5
