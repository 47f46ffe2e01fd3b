import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from emsphere.errors import ConfigurationError, DomainError
from emsphere.sigma import calibrate, classify, make_sigma, normalization_defect, normalize_weight

CATALOG = ["zero", "lin:-1", "lin:0.7", "quad:0.1", "quad:0.5", "quad:1.0", "neglog:2", "neglog:1.5", "poly:0.1,-0.3,0.4,0.2"]


def test_zero_is_class_a():
    s = make_sigma("zero")
    assert np.all(s(np.linspace(-1, 1, 5)) == 0)
    assert s.admissibility_class == "a"


def test_negative_linear_is_class_a():
    s = make_sigma("lin:-1")
    assert s(0.5) == pytest.approx(-0.5)
    assert s.admissibility_class == "a"


def test_quadratic_is_class_b():
    s = make_sigma("quad:0.5")
    assert np.allclose(s.d2(np.linspace(-1, 1, 7)), 1.0)
    assert s.admissibility_class == "b"


def test_neglog_classes():
    # -log(s + C) is decreasing and convex, so it lands in (a)
    assert make_sigma("neglog:2").admissibility_class == "a"
    assert make_sigma("lin:1").admissibility_class == "none"
    assert make_sigma("poly:0,1,1").admissibility_class == "b"
    assert make_sigma("poly:0,0,-1").admissibility_class == "none"


@pytest.mark.parametrize("c", ["1", "0.5", "-3"])
def test_neglog_domain(c):
    with pytest.raises(DomainError):
        make_sigma(f"neglog:{c}")


@pytest.mark.parametrize("desc", ["", "cubic:1", "lin", "quad:x", "zero:1", "poly:1,,2"])
def test_parse_errors(desc):
    with pytest.raises(ConfigurationError):
        make_sigma(desc)


@pytest.mark.parametrize("desc", CATALOG)
def test_derivatives_match_differences(desc):
    s = make_sigma(desc)
    x = np.linspace(-0.99, 0.99, 100)
    h = 1e-5
    assert np.max(np.abs(s.d1(x) - (s(x + h) - s(x - h)) / (2 * h))) <= 1e-7
    assert np.max(np.abs(s.d2(x) - (s.d1(x + h) - s.d1(x - h)) / (2 * h))) <= 1e-7


@settings(max_examples=40, deadline=None)
@given(desc=st.sampled_from(CATALOG), c=st.floats(-20, 20))
def test_classification_ignores_shift(desc, c):
    s = make_sigma(desc)
    assert classify(s.shifted(c)) == classify(s)


def test_normalize_zero(round64):
    assert normalize_weight(make_sigma("zero"), round64).shift == 0.0


def test_normalize_linear(round64):
    s = normalize_weight(make_sigma("lin:-1"), round64)
    assert s.shift == pytest.approx(np.log((np.e - 1 / np.e) / 2), abs=1e-12)
    assert s.shift == pytest.approx(0.161439, abs=1e-6)


@pytest.mark.parametrize("desc", CATALOG)
def test_normalization_defining_property(desc, round64):
    s = normalize_weight(make_sigma(desc), round64)
    assert normalization_defect(s, round64.grid) <= 1e-12
    assert s.admissibility_class == make_sigma(desc).admissibility_class


@pytest.mark.parametrize("desc", ["quad:0.5", "zero"])
def test_calibrate_even(desc, grid64):
    a, _ = calibrate(make_sigma(desc), grid64)
    assert abs(a) <= 1e-12


def test_calibrate_neglog(grid64):
    a, cal = calibrate(make_sigma("neglog:2"), grid64)

    def obs(a):
        return quad(lambda v: v * np.exp(-a * v) * (v + 2), -1, 1, epsabs=1e-12)[0]

    assert a > 0
    assert a == pytest.approx(brentq(obs, 0, 5, xtol=1e-14), abs=1e-10)
    assert cal.log_shift == 2.0


def test_calibrate_without_sign_change(grid64):
    from emsphere.errors import CalibrationError

    with pytest.raises(CalibrationError):
        calibrate(make_sigma("lin:3"), grid64, bracket=(0.0, 1.0))
