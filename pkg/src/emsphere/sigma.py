"""Multiplier functions sigma on the moment interval [-1, 1].

Every supported family is of the form

    sigma(s) = shift + p(s) - lam * log(s + C)

with ``p`` a polynomial and ``lam`` in {0, 1}, which covers ``zero``,
``lin:<a>``, ``quad:<eps>``, ``poly:<c0>,<c1>,...`` and ``neglog:<C>``
(plus any linear recalibration of these).

For ``neglog`` the constant must satisfy ``C > 1``: this is what keeps
``-log(s + C)`` finite on all of [-1, 1].  (The weaker requirement ``C > l0``
with ``l0 = -1`` would allow ``C`` in (-1, 1], where the logarithm blows up
inside the interval.)
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import CalibrationError, ConfigurationError, DomainError

L0, L1 = -1.0, 1.0
AREA = 4.0 * np.pi
_SAMPLES = np.concatenate(([L0], np.linspace(L0, L1, 1024), [L1]))


@dataclass(frozen=True)
class SigmaSpec:
    family: str
    poly: tuple = (0.0,)
    log_shift: float | None = None
    shift: float = 0.0
    descriptor: str = field(default="", compare=False)

    def value(self, s):
        s = np.asarray(s, dtype=np.float64)
        out = self.shift + P.polyval(s, self.poly)
        if self.log_shift is not None:
            out = out - np.log(s + self.log_shift)
        return out

    __call__ = value

    def d1(self, s):
        s = np.asarray(s, dtype=np.float64)
        out = P.polyval(s, P.polyder(self.poly)) + 0.0 * s
        if self.log_shift is not None:
            out = out - 1.0 / (s + self.log_shift)
        return out

    def d2(self, s):
        s = np.asarray(s, dtype=np.float64)
        out = P.polyval(s, P.polyder(self.poly, 2)) + 0.0 * s
        if self.log_shift is not None:
            out = out + 1.0 / (s + self.log_shift) ** 2
        return out

    @cached_property
    def admissibility_class(self):
        return classify(self)

    def shifted(self, c):
        return replace(self, shift=self.shift + float(c))

    def with_linear(self, a):
        """``sigma + a*s``."""
        coeffs = np.zeros(max(len(self.poly), 2))
        coeffs[: len(self.poly)] = self.poly
        coeffs[1] += float(a)
        desc = f"{self.descriptor}+lin:{a:.17g}" if self.descriptor else ""
        return replace(self, family=self.family, poly=tuple(coeffs), descriptor=desc)

    def kernel_params(self):
        """``(coeffs, lam, C)`` for the compiled flow kernel; shift folded into coeffs."""
        coeffs = np.array(self.poly, dtype=np.float64)
        coeffs[0] += self.shift
        if self.log_shift is None:
            return coeffs, 0.0, 1.0
        return coeffs, 1.0, float(self.log_shift)


def classify(sigma, samples=_SAMPLES, tol=1e-12):
    """Sampled admissibility: ``'a'``, ``'b'`` or ``'none'``.

    Class (a) is tested first and uses non-strict inequalities, so the zero
    and linear families land there.
    """
    d1 = sigma.d1(samples)
    d2 = sigma.d2(samples)
    if np.all(d1 <= tol) and np.all(d2 >= -tol):
        return "a"
    if np.all(d2 > 0.0):
        return "b"
    return "none"


def _num(text, desc):
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"cannot parse number {text!r} in sigma descriptor {desc!r}") from None


def make_sigma(desc):
    """Parse a descriptor such as ``quad:0.5`` into a :class:`SigmaSpec`."""
    if not isinstance(desc, str) or not desc.strip():
        raise ConfigurationError(f"empty sigma descriptor {desc!r}")
    desc = desc.strip()
    name, _, arg = desc.partition(":")
    name = name.lower()
    if name == "zero":
        if arg:
            raise ConfigurationError("'zero' takes no parameter")
        return SigmaSpec("zero", (0.0,), descriptor=desc)
    if not arg:
        raise ConfigurationError(f"sigma family {name!r} needs a parameter")
    if name == "lin":
        return SigmaSpec("linear", (0.0, _num(arg, desc)), descriptor=desc)
    if name == "quad":
        return SigmaSpec("quadratic", (0.0, 0.0, _num(arg, desc)), descriptor=desc)
    if name == "neglog":
        c = _num(arg, desc)
        if not c > 1.0:
            raise DomainError(f"neglog needs C > 1 so that log(s + C) is finite on [-1, 1]; got C={c}")
        return SigmaSpec("neglog", (0.0,), log_shift=c, descriptor=desc)
    if name == "poly":
        coeffs = tuple(_num(t, desc) for t in arg.split(","))
        return SigmaSpec("polynomial", coeffs, descriptor=desc)
    raise ConfigurationError(f"unknown sigma family {name!r}")


def weighted_volume(sigma, grid):
    """``int e^{-sigma(u)} omega`` in canonical moment coordinates (area form 2 pi d mu)."""
    return 2.0 * np.pi * grid.integrate(np.exp(-sigma.value(grid.nodes)))


def normalize_weight(sigma, ref):
    """Shift sigma so that ``int e^{-sigma(u)} omega = V``.

    The pushforward of any invariant metric in the class is ``2 pi d mu``, so
    only the grid of ``ref`` matters.
    """
    grid = getattr(ref, "grid", ref)
    c = np.log(weighted_volume(sigma, grid) / AREA)
    return sigma.shifted(c)


def normalization_defect(sigma, grid):
    return abs(weighted_volume(sigma, grid) / AREA - 1.0)


def check_normalized(sigma, grid, tol=1e-8):
    defect = normalization_defect(sigma, grid)
    if defect > tol:
        raise DomainError(
            f"sigma is not weight-normalized (relative defect {defect:.3e}); call normalize_weight first"
        )


def calibrate(base, grid=None, bracket=(-10.0, 10.0), tol=1e-10):
    """Find ``a`` with zero obstruction for ``base + a*s``.

    Returns ``(a, calibrated_sigma)``.
    """
    from scipy.optimize import brentq

    from .solver import obstruction

    def obs(a):
        return obstruction(base.with_linear(a), grid)

    lo, hi = bracket
    probe = np.linspace(lo, hi, 41)
    values = np.array([obs(a) for a in probe])
    steps = np.diff(values)
    if not (np.all(steps < 0) or np.all(steps > 0)):
        raise CalibrationError("obstruction is not monotone in a over the search bracket")
    if values[0] * values[-1] > 0:
        raise CalibrationError(f"no sign change of the obstruction on [{lo}, {hi}]")
    if abs(obs(0.0)) <= tol:
        a_star = 0.0
    else:
        a_star = brentq(obs, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    calibrated = base.with_linear(a_star)
    if abs(obs(a_star)) > tol:
        raise CalibrationError(f"calibration residual {obs(a_star):.3e} above {tol}")
    return a_star, calibrated
