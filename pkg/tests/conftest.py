import pytest
from mpmath import mp

from lib.phase_core import EulerParams
from lib.profile_solver import SolverOptions, solve_profile


TEST_DPS = 30


@pytest.fixture(autouse=True)
def working_precision():
    with mp.workdps(TEST_DPS):
        yield TEST_DPS


@pytest.fixture
def stock_params():
    return EulerParams.create(3, 2, '1.2', '0.6')


@pytest.fixture(scope='session')
def interior_profile():
    """Small interior-only solve shared by the slow tests"""
    with mp.workdps(TEST_DPS):
        params = EulerParams.create(3, 2, '1.2')
        return solve_profile(params, None, SolverOptions(N1=24, N2=24, interior_only=True))


@pytest.fixture(scope='session')
def exterior_profile():
    """Interior and exterior solve of the stock parameters"""
    with mp.workdps(TEST_DPS):
        params = EulerParams.create(3, 2, '1.2', '0.6')
        return solve_profile(params, None, SolverOptions(N1=32, N2=32))
