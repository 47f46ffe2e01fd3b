import numpy as np
import pytest

from emsphere.functionals import (
    cocycle_defect,
    f_tilde,
    functional_record,
    i_tilde,
    j_tilde,
    osc,
    quadratic_path,
    weighted_volume_of,
)
from emsphere.geometry import AREA, apply_potential, random_potential, recover_potential
from emsphere.sigma import make_sigma, normalize_weight
from emsphere.solver import direct_solve


@pytest.fixture(scope="module")
def sig48(round48):
    return normalize_weight(make_sigma("quad:0.5"), round48)


def test_zero_potential(round48, sig48):
    z = np.zeros(round48.grid.size)
    assert i_tilde(round48, z, sig48) == 0.0
    assert j_tilde(round48, z, sig48) == 0.0
    assert f_tilde(round48, z, sig48) == pytest.approx(0.0, abs=1e-14)


def test_constant_invariance(round48, sig48):
    rng = np.random.default_rng(2)
    phi = random_potential(round48, rng, 0.3).phi
    # F~ only sees the metric, not the additive constant
    assert f_tilde(round48, phi + 0.7, sig48) == pytest.approx(f_tilde(round48, phi, sig48), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_nonnegativity(round48, sig48, seed):
    rec = functional_record(round48, random_potential(round48, np.random.default_rng(seed), 0.3), sig48)
    assert rec.I_tilde >= 0 and rec.J_tilde >= 0 and rec.I_minus_J >= 0
    assert rec.osc_phi > 0


def test_unweighted_relation(round48):
    # with sigma = 0 and the round reference, I = 2 J on any potential
    zero = make_sigma("zero")
    phi = random_potential(round48, np.random.default_rng(9), 0.3).phi
    d = round48.grid.d(phi)
    j_classical = round48.integrate(0.5 * round48.psi * d * d) / (2 * AREA)
    assert j_tilde(round48, phi, zero) == pytest.approx(j_classical, abs=1e-12)
    assert i_tilde(round48, phi, zero) == pytest.approx(2 * j_classical, abs=1e-12)


def test_path_independence(round48, sig48):
    phi = random_potential(round48, np.random.default_rng(4), 0.3).phi
    assert abs(j_tilde(round48, phi, sig48) - j_tilde(round48, phi, sig48, quadratic_path(phi))) <= 1e-10


def test_weighted_volume(round48, sig48):
    phi = random_potential(round48, np.random.default_rng(6), 0.3).phi
    assert abs(weighted_volume_of(round48, phi, sig48) / AREA - 1) <= 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_cocycle(round48, sig48, seed):
    rng = np.random.default_rng(seed)
    p1 = random_potential(round48, rng, 0.1)
    p2 = random_potential(apply_potential(p1), rng, 0.1)
    assert cocycle_defect(round48, p1, p2.phi, sig48) <= 1e-7


def test_critical_point(round48, sig48):
    em = direct_solve(make_sigma("quad:0.5"), round48.grid)
    phi = recover_potential(round48, em).phi
    rng = np.random.default_rng(1)
    eps = 1e-4
    for _ in range(3):
        eta = random_potential(round48, rng, 0.3).phi
        d = (f_tilde(round48, phi + eps * eta, sig48) - f_tilde(round48, phi - eps * eta, sig48)) / (2 * eps)
        assert abs(d) / np.max(np.abs(eta)) <= 1e-6


def test_osc():
    assert osc(np.array([1.0, -2.0, 0.5])) == 3.0
