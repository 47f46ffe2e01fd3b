"""Chebyshev-Lobatto collocation on the moment interval [-1, 1]."""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

from . import _kernels
from .errors import ConfigurationError

MIN_NODES = 8


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def chebyshev_lobatto(n):
    """Ascending Lobatto nodes ``mu_j = -cos(pi j / n)``, j = 0..n."""
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    # exact symmetry and endpoints
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    if n % 2 == 0:
        x[n // 2] = 0.0
    return x


def cheb_diff_matrix(x):
    """Collocation derivative on Lobatto nodes; diagonal by the negative-sum trick."""
    n = len(x) - 1
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return D


def clenshaw_curtis_weights(n):
    """Clenshaw-Curtis weights for the nodes of :func:`chebyshev_lobatto`."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    interior = theta[1:-1]
    if n % 2 == 0:
        w[0] = w[-1] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k * k - 1)
        v -= np.cos(n * interior) / (n * n - 1)
    else:
        w[0] = w[-1] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Collocation grid: nodes, differentiation, quadrature and interpolation data.

    ``n`` is the polynomial degree, so there are ``n + 1`` nodes with
    ``nodes[0] == -1`` and ``nodes[n] == 1``.
    """

    n: int
    nodes: np.ndarray
    diff_op: np.ndarray
    quad_weights: np.ndarray
    bary_weights: np.ndarray
    cumint: np.ndarray
    to_coeffs: np.ndarray

    @property
    def size(self):
        return self.n + 1

    def d(self, f):
        return self.diff_op @ f

    def integrate(self, f):
        """Quadrature of ``f`` over [-1, 1] (no area factor)."""
        return float(self.quad_weights @ f)

    def antiderivative(self, f):
        """Nodal values of the antiderivative vanishing at -1."""
        return self.cumint @ f

    def interp(self, values, x):
        return _kernels.barycentric_eval(self.nodes, self.bary_weights, values, x)

    def coefficients(self, f):
        return self.to_coeffs @ f

    def evaluate(self, f):
        """Nodal values of a callable."""
        return np.asarray(f(self.nodes), dtype=np.float64) * np.ones(self.size)

    @property
    def center_index(self):
        return int(np.argmin(np.abs(self.nodes)))


def build_grid(n=64):
    if int(n) != n or n < MIN_NODES:
        raise ConfigurationError(f"grid needs n >= {MIN_NODES}, got {n}")
    n = int(n)
    x = chebyshev_lobatto(n)
    D = cheb_diff_matrix(x)
    w = clenshaw_curtis_weights(n)
    bw = (-1.0) ** np.arange(n + 1)
    bw[0] *= 0.5
    bw[-1] *= 0.5
    vander = C.chebvander(x, n)
    to_coeffs = np.linalg.inv(vander)
    # antiderivative in coefficient space, evaluated back at the nodes
    integ = np.zeros((n + 2, n + 1))
    for k in range(n + 1):
        e = np.zeros(n + 1)
        e[k] = 1.0
        integ[:, k] = C.chebint(e, lbnd=-1.0)
    cumint = C.chebvander(x, n + 1) @ integ @ to_coeffs
    cumint[0] = 0.0
    return Grid(
        n=n,
        nodes=_frozen(x),
        diff_op=_frozen(D),
        quad_weights=_frozen(w),
        bary_weights=_frozen(bw),
        cumint=_frozen(cumint),
        to_coeffs=_frozen(to_coeffs),
    )
