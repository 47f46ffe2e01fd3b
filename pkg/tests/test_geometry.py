import numpy as np
import pytest

from emsphere.errors import DomainError
from emsphere.geometry import (
    AREA,
    Potential,
    apply_potential,
    box_tilde,
    gradient_norm_sq,
    hamiltonian_of_potential,
    ibp_defect,
    metric_from_profile,
    pull_back,
    push_forward,
    random_potential,
    recover_potential,
    ricci_potential,
)
from emsphere.sigma import make_sigma, normalize_weight


def test_round_reference(round64):
    mu = round64.grid.nodes
    assert np.allclose(round64.psi, 1 - mu**2, atol=0)
    assert np.all(round64.h == 0)
    assert round64.integrate(np.ones_like(mu)) == pytest.approx(AREA, abs=1e-12)
    assert np.max(np.abs(round64.curvature() - 1.0)) < 1e-10


def test_laplacian_of_moment(round64):
    zero = make_sigma("zero")
    mu = round64.grid.nodes
    assert np.max(np.abs(box_tilde(round64, zero, mu) + mu)) < 1e-12
    assert np.max(np.abs(gradient_norm_sq(round64, mu) - 0.5 * (1 - mu**2))) < 1e-13


def test_ricci_potential_of_profile(grid64):
    mu = grid64.nodes
    psi = (1 - np.exp(0.5 * (mu**2 - 1))) / 0.5
    st = metric_from_profile(grid64, psi)
    dh = grid64.d(st.h)
    assert np.max(np.abs(psi * dh + grid64.d(psi) + 2 * mu)) < 1e-10
    assert st.integrate(np.exp(st.h)) == pytest.approx(AREA, rel=1e-12)
    assert np.allclose(ricci_potential(st), st.h)
    assert st.integrate(st.curvature()) == pytest.approx(AREA, abs=1e-9)


def test_nonpositive_profile_rejected(grid64):
    mu = grid64.nodes
    with pytest.raises(DomainError):
        metric_from_profile(grid64, -(1 - mu**2))


@pytest.mark.parametrize("seed", range(3))
def test_apply_potential_closure(round64, seed):
    rng = np.random.default_rng(seed)
    p = random_potential(round64, rng, 0.1)
    st = apply_potential(p)
    assert st.dpsi[0] == pytest.approx(2.0, abs=1e-8)
    assert st.dpsi[-1] == pytest.approx(-2.0, abs=1e-8)
    assert st.integrate(st.curvature()) == pytest.approx(AREA, abs=1e-8)


def test_potential_round_trip(round64):
    rng = np.random.default_rng(7)
    p = random_potential(round64, rng, 0.2)
    st = apply_potential(p)
    u_c = hamiltonian_of_potential(p)[round64.grid.center_index]
    q = recover_potential(round64, st, anchor=u_c)
    target = p.phi - round64.grid.integrate(p.phi) / 2
    assert np.max(np.abs(q.phi - target)) < 1e-9


def test_push_pull_inverse(round64):
    rng = np.random.default_rng(3)
    p = random_potential(round64, rng, 0.2)
    f = np.cos(2 * round64.grid.nodes)
    assert np.max(np.abs(pull_back(p, push_forward(p, f)) - f)) < 1e-10


def test_positivity_violation(round64):
    p = Potential(round64, -3.0 * round64.grid.nodes**2)
    with pytest.raises(DomainError):
        apply_potential(p)


def test_potential_is_readonly(round64):
    p = Potential(round64, np.zeros(round64.grid.size))
    with pytest.raises(ValueError):
        p.phi[0] = 1.0


@pytest.mark.parametrize("desc", ["zero", "quad:0.5", "lin:-1", "neglog:2"])
def test_integration_by_parts(round48, desc):
    rng = np.random.default_rng(11)
    sig = normalize_weight(make_sigma(desc), round48)
    st = apply_potential(random_potential(round48, rng, 0.1))
    f = random_potential(round48, rng, 0.3).phi
    g = random_potential(round48, rng, 0.3).phi
    assert ibp_defect(st, sig, f, g) <= 1e-9


def test_random_potential_deterministic(round64):
    a = random_potential(round64, np.random.default_rng(5), 0.3).phi
    b = random_potential(round64, np.random.default_rng(5), 0.3).phi
    assert np.array_equal(a, b)
