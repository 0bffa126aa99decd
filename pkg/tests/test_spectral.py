import numpy as np
import pytest
from mpmath import mpf

from lib.errors import DomainError
from lib.spectral import AFFINE, SINH, CollocationGrid, barycentric_interpolate, build_grids, chebyshev_nodes


def cubic(Z):
    return Z**3 - 2*Z + 1


def test_nodes_run_from_right_to_left():
    x = chebyshev_nodes(8)
    assert x[0] == 1 and abs(x[-1] + 1) < mpf('1e-28')
    assert all(a > b for a, b in zip(x, x[1:]))


@pytest.mark.parametrize('interval_id', [1, 2])
def test_differentiation_is_exact_on_polynomials(interval_id):
    grid = CollocationGrid(interval_id, 10, mpf(2), mpf(5), AFFINE)
    f = np.array([cubic(Z) for Z in grid.nodes_Z], dtype=object)
    df = grid.D(1).dot(f)
    d2f = grid.D(2).dot(f)
    for Z, a, b in zip(grid.nodes_Z, df, d2f):
        assert abs(a - (3*Z**2 - 2)) < mpf('1e-20')
        assert abs(b - 6*Z) < mpf('1e-18')


def test_barycentric_interpolation_reproduces_polynomials():
    grid = CollocationGrid(1, 8, mpf(3), mpf(6))
    f = np.array([cubic(Z) for Z in grid.nodes_Z], dtype=object)
    for Z in (mpf('0.1'), mpf('1.7'), mpf('2.95')):
        assert abs(grid.interpolate(f, Z) - cubic(Z)) < mpf('1e-22')
    assert barycentric_interpolate(grid.nodes_x, f, grid.nodes_x[3]) == f[3]


def test_sinh_map_clusters_next_to_the_sonic_point():
    grid = CollocationGrid(2, 16, mpf(1), mpf(20), SINH, mpf(3))
    assert grid.nodes_Z[-1] == 1 and grid.nodes_Z[0] == 20
    affine = CollocationGrid(2, 16, mpf(1), mpf(20), AFFINE)
    assert grid.nodes_Z[-2] - 1 < affine.nodes_Z[-2] - 1
    for x in (mpf('-0.9'), mpf('0.2'), mpf('0.99')):
        assert abs(grid.to_x(grid.to_Z(x)) - x) < mpf('1e-25')


def test_grids_reject_low_order_and_bad_endpoints():
    with pytest.raises(DomainError):
        CollocationGrid(1, 4, mpf(1), mpf(2))
    with pytest.raises(DomainError):
        build_grids(2, 1, 16, 16)


def test_build_grids_share_the_sonic_point():
    I1, I2 = build_grids(mpf(1), mpf(20), 12, 12)
    assert I1.right == I2.left == 1
    assert I1.nodes_Z[-1] == 0 and I2.nodes_Z[0] == 20
