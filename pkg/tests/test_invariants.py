import numpy as np
import pytest

from emsphere.geometry import random_potential
from emsphere.invariants import (
    futaki,
    futaki_independence_check,
    lambda1_eigenspace,
    q_field,
    spectrum,
    weighted_inner,
)
from emsphere.sigma import make_sigma, normalize_weight
from emsphere.solver import direct_solve, obstruction

CATALOG = ("zero", "quad:0.1", "quad:0.5", "quad:1.0", "lin:-1", "neglog:2")


def test_round_linear_value(round64):
    val = futaki(round64, make_sigma("lin:-1"))
    assert val.real == 0.0
    assert val.imag == pytest.approx(4 * np.pi / np.e, abs=1e-10)


@pytest.mark.parametrize("desc", CATALOG)
def test_proportional_to_obstruction(round64, desc):
    # on the round reference F = 2 pi i O(sigma)
    sig = make_sigma(desc)
    assert futaki(round64, sig).imag == pytest.approx(2 * np.pi * obstruction(sig, round64.grid), abs=1e-10)


@pytest.mark.parametrize("desc", CATALOG)
def test_independent_of_metric(round64, desc):
    rng = np.random.default_rng(42)
    pots = [random_potential(round64, rng, 0.3) for _ in range(5)]
    rep = futaki_independence_check(round64, make_sigma(desc), pots)
    assert rep.passed
    assert rep.canonical_deviation <= 1e-5


def test_shift_invariance(round64):
    sig = make_sigma("lin:-1")
    # a constant in sigma rescales the weight; the canonical invariant scales with it
    assert futaki(round64, sig.shifted(0.3)) == pytest.approx(np.exp(-0.3) * futaki(round64, sig), abs=1e-12)


def test_vanishes_at_solution(grid64):
    sig = make_sigma("quad:0.5")
    em = direct_solve(sig, grid64)
    assert abs(futaki(em, sig)) <= 1e-9
    q, sd = q_field(em, normalize_weight(sig, em))
    assert sd <= 1e-7 * (1 + np.max(np.abs(q)))


def test_round_eigenspace(round64):
    zero = make_sigma("zero")
    pairs = lambda1_eigenspace(round64, zero)
    assert len(pairs) == 1
    lam, f = pairs[0]
    mu = round64.grid.nodes
    mu_n = mu / np.sqrt(weighted_inner(round64, zero, mu, mu))
    assert lam == pytest.approx(-1.0, abs=1e-8)
    assert np.arccos(min(1.0, weighted_inner(round64, zero, f, mu_n))) <= 1e-6
    assert f[-1] > 0


def test_round_spectrum(round64):
    ev = spectrum(round64, make_sigma("zero"), 4)
    # -l(l+1)/2 on the unit-area-4pi sphere with this scaling
    assert np.allclose(ev.real, [0.0, -1.0, -3.0, -6.0], atol=1e-8)
