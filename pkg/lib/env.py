# standard library
import os

# third-party libraries
from mpmath import mp



class WrongRuntimeEnvironmentVariable(Exception):
    pass


SSIMPLODE_PRECISION_ENV = 'SSIMPLODE_DPS'
DEFAULT_PRECISION = 50
MIN_PRECISION = 15


def get_precision() -> int:
    """Working precision in significant decimal digits"""
    dps = os.getenv(SSIMPLODE_PRECISION_ENV)
    if dps == None or dps == '':
        return DEFAULT_PRECISION
    try:
        value = int(dps)
    except ValueError:
        raise WrongRuntimeEnvironmentVariable(f'got non-integer precision: \"{dps}\"')
    if value < MIN_PRECISION:
        raise WrongRuntimeEnvironmentVariable(f'precision has to be at least {MIN_PRECISION} digits, got \"{dps}\"')
    return value


def set_precision(dps) -> int:
    """Sets the environment default and the mpmath working precision; returns the effective value"""
    if dps == None:
        dps = get_precision()
    try:
        value = int(dps)
    except (TypeError, ValueError):
        raise WrongRuntimeEnvironmentVariable(f'got non-integer precision: \"{dps}\"')
    if value < MIN_PRECISION:
        raise WrongRuntimeEnvironmentVariable(f'precision has to be at least {MIN_PRECISION} digits, got \"{dps}\"')

    os.environ[SSIMPLODE_PRECISION_ENV] = str(value)
    mp.dps = value
    return get_precision()
