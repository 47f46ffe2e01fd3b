import numpy as np
import pytest

from emsphere.errors import ConfigurationError
from emsphere.grid import build_grid


@pytest.mark.parametrize("n", [8, 16, 48, 64])
def test_grid_invariants(n):
    g = build_grid(n)
    mu = g.nodes
    assert g.size == n + 1
    assert mu[0] == -1.0 and mu[-1] == 1.0
    assert np.all(np.diff(mu) > 0)
    assert np.max(np.abs(g.diff_op @ np.ones(g.size))) <= 1e-12
    assert np.max(np.abs(g.diff_op @ mu**2 - 2 * mu)) <= 1e-10
    assert abs(g.quad_weights.sum() - 2.0) <= 1e-12
    assert abs(g.quad_weights @ mu**2 - 2.0 / 3.0) <= 1e-12


def test_cubic_derivative_n16():
    g = build_grid(16)
    assert np.max(np.abs(g.d(g.nodes**3) - 3 * g.nodes**2)) <= 1e-9


@pytest.mark.parametrize("n", [8, 64])
def test_exponential_quadrature(n):
    g = build_grid(n)
    assert abs(g.integrate(np.exp(g.nodes)) - (np.e - 1 / np.e)) <= 1e-8


def test_antiderivative_and_interp(grid64):
    mu = grid64.nodes
    F = grid64.antiderivative(np.cos(mu))
    assert np.max(np.abs(F - (np.sin(mu) + np.sin(1.0)))) < 1e-13
    x = np.linspace(-1, 1, 37)
    assert np.max(np.abs(grid64.interp(np.exp(mu), x) - np.exp(x))) < 1e-13


@pytest.mark.parametrize("n", [0, 7, 3.5])
def test_too_small(n):
    with pytest.raises(ConfigurationError):
        build_grid(n)
