import os

import pytest

from lib.config import EFFECTIVE_CONFIG_FILENAME
from lib.env import SSIMPLODE_PRECISION_ENV
from lib.utils import EXIT_MISSING_COMMAND, EXIT_VALIDATION
from lib.validate_utils import VERIFY_REPORT_FILENAME, read_report_from_dir
from SSimplode import main


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv(SSIMPLODE_PRECISION_ENV, raising=False)


def test_missing_command_prints_help():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == EXIT_MISSING_COMMAND


def test_unknown_config_key_is_a_validation_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(['profile', '--out', str(tmp_path), '--set', 'params.foo=1'])
    assert e.value.code == EXIT_VALIDATION


def test_parameters_outside_the_window_are_a_validation_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(['profile', '--out', str(tmp_path), '--dps', '30', '--r', '1.5'])
    assert e.value.code == EXIT_VALIDATION
    assert os.path.isfile(tmp_path / 'profile' / EFFECTIVE_CONFIG_FILENAME)


def test_verify_writes_its_report(tmp_path):
    rows = main(['verify', '--out', str(tmp_path), '--dps', '30', '--level', '0'])
    run_dir = tmp_path / 'verify'
    assert (run_dir / VERIFY_REPORT_FILENAME).is_file()
    checks, total = read_report_from_dir(str(run_dir))
    assert total == len(rows)
    assert all(checks.values())
