import numpy as np
import pytest

from emsphere.errors import ContinuityStalled, DomainError, NoSolutionObstruction
from emsphere.functionals import fact2_min_slope, prop1b_defect
from emsphere.geometry import apply_potential
from emsphere.grid import build_grid
from emsphere.sigma import calibrate, make_sigma, normalize_weight
from emsphere.solver import continuity_solve, direct_solve, em_residual, obstruction


def test_obstruction_values(grid64):
    assert obstruction(make_sigma("zero"), grid64) == pytest.approx(0.0, abs=1e-15)
    assert obstruction(make_sigma("lin:-1"), grid64) == pytest.approx(2 / np.e, abs=1e-12)
    assert obstruction(make_sigma("neglog:2"), grid64) == pytest.approx(2 / 3, abs=1e-12)
    assert obstruction(make_sigma("lin:2"), grid64) < 0


def test_obstruction_default_grid():
    assert obstruction(make_sigma("lin:-1")) == pytest.approx(2 / np.e, abs=1e-12)


@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_direct_quad_closed_form(grid64, eps):
    st = direct_solve(make_sigma(f"quad:{eps}"), grid64)
    mu = grid64.nodes
    expected = (1 - np.exp(eps * (mu**2 - 1))) / eps
    assert np.max(np.abs(st.psi - expected)) <= 1e-12
    assert em_residual(st, make_sigma(f"quad:{eps}")) <= 1e-8


def test_direct_quad_centre_value(grid64):
    st = direct_solve(make_sigma("quad:0.5"), grid64)
    assert st.psi[grid64.center_index] == pytest.approx(0.786939, abs=1e-6)


def test_direct_obstructed(grid64):
    with pytest.raises(NoSolutionObstruction) as info:
        direct_solve(make_sigma("lin:-1"), grid64)
    assert info.value.value == pytest.approx(2 / np.e)


@pytest.mark.parametrize("desc", ["zero", "quad:0.1", "quad:1.0"])
def test_continuity_matches_direct(round64, desc):
    raw = make_sigma(desc)
    pot, trace = continuity_solve(round64, normalize_weight(raw, round64))
    assert trace.outcome == "converged"
    assert trace.last.t == 1.0
    assert np.max(np.abs(apply_potential(pot).psi - direct_solve(raw, round64.grid).psi)) <= 1e-8
    assert max(st.mean_defect for st in trace.steps) <= 1e-8
    assert max(st.volume_defect for st in trace.steps) <= 1e-8
    assert fact2_min_slope(trace) >= -1e-8


def test_continuity_calibrated_neglog(round64):
    _, raw = calibrate(make_sigma("neglog:2"), round64.grid)
    pot, _ = continuity_solve(round64, normalize_weight(raw, round64))
    assert np.max(np.abs(apply_potential(pot).psi - direct_solve(raw, round64.grid).psi)) <= 1e-8


def test_unnormalized_sigma_rejected(round64):
    with pytest.raises(DomainError):
        continuity_solve(round64, make_sigma("lin:-1"))


def test_obstructed_stall(round64):
    with pytest.raises(ContinuityStalled) as info:
        continuity_solve(round64, normalize_weight(make_sigma("lin:-1"), round64))
    exc = info.value
    assert 0 < exc.t_last < 1
    assert exc.osc > 1.0
    assert exc.obstruction == pytest.approx(2 / np.e, abs=1e-10)
    assert exc.trace.outcome == "stalled"


def test_stops_are_hit(round64):
    sig = normalize_weight(make_sigma("quad:0.5"), round64)
    _, trace = continuity_solve(round64, sig, stops=(0.33, 0.9))
    assert trace.at(0.33).t == 0.33
    assert trace.at(0.9).t == 0.9


def test_prop1b_refinement():
    g = build_grid(48)
    from emsphere.geometry import round_reference

    ref = round_reference(g)
    sig = normalize_weight(make_sigma("quad:0.5"), ref)
    d50 = prop1b_defect(continuity_solve(ref, sig, fixed_steps=50)[1])
    d200 = prop1b_defect(continuity_solve(ref, sig, fixed_steps=200)[1])
    assert d50 <= 5e-4
    assert d50 / d200 >= 4.0


def test_prop1b_needs_steps(round64):
    from emsphere.errors import DiagnosticError

    _, trace = continuity_solve(round64, normalize_weight(make_sigma("quad:0.5"), round64), fixed_steps=4)
    with pytest.raises(DiagnosticError):
        prop1b_defect(trace)
