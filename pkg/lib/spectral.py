"""
Chebyshev Gauss-Lobatto grids, differentiation matrices and barycentric
interpolation at the working precision.

Node n sits at x_n = cos(πn/N), so node 0 is the right end (x = 1) of every
interval. I1 = [0, Zp1] uses the affine map, I2 = [Zp1, Zp2] a sinh map that
clusters nodes next to Zp1.
"""
# standard library
from dataclasses import dataclass, field
from typing import Dict, Tuple

# third-party libraries
import numpy as np
from mpmath import mp, mpf

# local
from lib.arith import to_mpf
from lib.errors import DomainError
from lib.file import encode_real, decode_real


MIN_ORDER = 8
AFFINE = 'affine'
SINH = 'sinh'


def chebyshev_nodes(N: int) -> np.ndarray:
    return np.array([mp.cos(mp.pi*n/N) for n in range(N + 1)], dtype=object)


def chebyshev_D(x: np.ndarray) -> np.ndarray:
    """First-derivative matrix on the Gauss-Lobatto nodes x; diagonal by the negative row sum"""
    N = len(x) - 1
    c = np.array([mpf(2) if n in (0, N) else mpf(1) for n in range(N + 1)], dtype=object)
    D = np.empty((N + 1, N + 1), dtype=object)
    for i in range(N + 1):
        for j in range(N + 1):
            if i != j:
                D[i, j] = (c[i]/c[j])*(-1)**(i + j)/(x[i] - x[j])
    for i in range(N + 1):
        D[i, i] = -sum((D[i, j] for j in range(N + 1) if j != i), mpf(0))
    return D


def barycentric_weights(N: int) -> np.ndarray:
    w = np.array([mpf((-1)**n) for n in range(N + 1)], dtype=object)
    w[0] /= 2
    w[N] /= 2
    return w


def barycentric_interpolate(x_nodes: np.ndarray, values: np.ndarray, x) -> mpf:
    """Exact at the nodes; the removable singularity of the formula is special-cased"""
    x = to_mpf(x)
    w = barycentric_weights(len(x_nodes) - 1)
    num = mpf(0)
    den = mpf(0)
    for xn, wn, fn in zip(x_nodes, w, values):
        dx = x - xn
        if dx == 0:
            return fn
        t = wn/dx
        num += t*fn
        den += t
    return num/den



@dataclass
class CollocationGrid:
    interval_id: int
    N: int
    Zp1: mpf
    Zp2: mpf
    map_kind: str = AFFINE
    clustering: mpf = mpf(0)
    nodes_x: np.ndarray = field(init=False, repr=False)
    nodes_Z: np.ndarray = field(init=False, repr=False)
    dZdx: np.ndarray = field(init=False, repr=False)
    _D: Dict[int, np.ndarray] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.N < MIN_ORDER:
            raise DomainError(f'collocation order has to be at least {MIN_ORDER}, got {self.N}')
        self.Zp1, self.Zp2 = to_mpf(self.Zp1), to_mpf(self.Zp2)
        self.clustering = to_mpf(self.clustering)
        self.nodes_x = chebyshev_nodes(self.N)
        self.nodes_Z = np.array([self.to_Z(x) for x in self.nodes_x], dtype=object)
        self.dZdx = np.array([self._dZdx(x) for x in self.nodes_x], dtype=object)
        # the end nodes are set exactly
        self.nodes_Z[0] = self.right
        self.nodes_Z[self.N] = self.left

    @property
    def left(self) -> mpf:
        return mpf(0) if self.interval_id == 1 else self.Zp1

    @property
    def right(self) -> mpf:
        return self.Zp1 if self.interval_id == 1 else self.Zp2

    def _uses_sinh(self) -> bool:
        return self.map_kind == SINH and self.clustering != 0

    def to_Z(self, x) -> mpf:
        x = to_mpf(x)
        a, b = self.left, self.right
        if not self._uses_sinh():
            return a + (b - a)*(1 + x)/2
        c = self.clustering
        return a + (b - a)*mp.sinh(c*(1 + x)/2)/mp.sinh(c)

    def to_x(self, Z) -> mpf:
        Z = to_mpf(Z)
        a, b = self.left, self.right
        if not self._uses_sinh():
            return 2*(Z - a)/(b - a) - 1
        c = self.clustering
        return 2*mp.asinh((Z - a)*mp.sinh(c)/(b - a))/c - 1

    def _dZdx(self, x) -> mpf:
        a, b = self.left, self.right
        if not self._uses_sinh():
            return (b - a)/2
        c = self.clustering
        return (b - a)*c*mp.cosh(c*(1 + x)/2)/(2*mp.sinh(c))

    def contains(self, Z) -> bool:
        return self.left <= to_mpf(Z) <= self.right

    def D(self, k: int = 1) -> np.ndarray:
        """d^k/dZ^k as a dense matrix, D^(k) = (D^(1))^k"""
        if k < 1:
            raise ValueError('derivative order has to be positive')
        if 1 not in self._D:
            Dx = chebyshev_D(self.nodes_x)
            inv = np.array([1/j for j in self.dZdx], dtype=object)
            self._D[1] = inv[:, None]*Dx
        if k not in self._D:
            self._D[k] = self.D(k - 1).dot(self._D[1])
        return self._D[k]

    def interpolate(self, values: np.ndarray, Z) -> mpf:
        return barycentric_interpolate(self.nodes_x, values, self.to_x(Z))

    def to_dict(self) -> Dict:
        return {
            'interval_id': self.interval_id,
            'N': self.N,
            'Zp1': encode_real(self.Zp1),
            'Zp2': encode_real(self.Zp2),
            'map_kind': self.map_kind,
            'clustering': encode_real(self.clustering),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'CollocationGrid':
        return cls(int(data['interval_id']), int(data['N']), decode_real(data['Zp1']),
                   decode_real(data['Zp2']), data['map_kind'], decode_real(data['clustering']))


def build_grids(Zp1, Zp2, N1: int, N2: int, clustering=3) -> Tuple[CollocationGrid, CollocationGrid]:
    Zp1, Zp2 = to_mpf(Zp1), to_mpf(Zp2)
    if not (0 < Zp1 < Zp2):
        raise DomainError(f'grid endpoints have to satisfy 0 < Zp1 < Zp2, got Zp1={Zp1}, Zp2={Zp2}')
    I1 = CollocationGrid(1, N1, Zp1, Zp2, AFFINE)
    I2 = CollocationGrid(2, N2, Zp1, Zp2, SINH, to_mpf(clustering))
    return I1, I2
