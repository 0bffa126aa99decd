"""
Scalar backend helpers.

Nodal fields are numpy object arrays holding mpmath reals so that every solver
runs at the working precision `mp.dps`; the evolution module may instead run on
plain float64 arrays. The helpers below hide the difference.
"""
# standard library
from typing import Iterable, Sequence

# third-party libraries
import numpy as np
from mpmath import mp, mpf

# local
from lib.errors import SingularJacobian



def to_mpf(x) -> mpf:
    """Exact decimal reading of python floats ('1.2' rather than its binary neighbour)"""
    if isinstance(x, (float, np.floating)):
        return mpf(repr(float(x)))
    if isinstance(x, str):
        return mpf(x.strip())
    return mpf(x)


def mpf_array(values: Iterable) -> np.ndarray:
    return np.array([to_mpf(v) for v in values], dtype=object)


def mpf_zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(mpf(0))
    return out


def to_float(values) -> np.ndarray:
    return np.array([float(v) for v in np.ravel(values)], dtype=float).reshape(np.shape(values))


def max_abs(values) -> mpf:
    if len(values) == 0:
        return mpf(0)
    return max(abs(v) for v in np.ravel(values))


def solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense solve at the working precision; float arrays go through LAPACK"""
    if A.dtype != object:
        try:
            return np.linalg.solve(A, b)
        except np.linalg.LinAlgError as e:
            raise SingularJacobian(str(e))
    try:
        x = mp.lu_solve(mp.matrix(A.tolist()), mp.matrix(list(b)))
    except ZeroDivisionError as e:
        raise SingularJacobian(str(e))
    return np.array([x[i] for i in range(x.rows)], dtype=object)


def lstsq(A: np.ndarray, b: np.ndarray):
    """Least squares via Householder QR; returns (coefficients, residual norm)"""
    x, res = mp.qr_solve(mp.matrix(A.tolist()), mp.matrix(list(b)))
    return np.array([x[i] for i in range(x.rows)], dtype=object), res


def falling_factorial(x, k: int):
    out = mpf(1)
    for j in range(k):
        out *= (x - j)
    return out


def polyval_mp(coeffs: Sequence, t):
    """Horner evaluation of sum coeffs[k] t^k"""
    out = mpf(0)
    for c in reversed(coeffs):
        out = out * t + c
    return out
