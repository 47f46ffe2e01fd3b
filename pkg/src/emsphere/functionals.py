"""Weighted energy functionals I~, J~, F~ on invariant Kahler potentials.

All functionals are taken relative to a reference metric ``ref`` and use the
weighted volume form ``e^{-sigma(u)} omega``; sigma must already be
weight-normalized (``int e^{-sigma(u)} omega = V``).  Integrals are
evaluated in the moment coordinate of ``ref`` where ``omega = 2 pi d mu`` and
``omega_phi = (1 + (psi phi')'/2) omega``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DiagnosticError, DomainError
from .geometry import AREA, Potential, apply_potential, kahler_ratio, pull_back
from .sigma import check_normalized

_GAUSS_NODES = 16


def _phi(ref, phi):
    if isinstance(phi, Potential):
        if phi.background is not ref:
            raise ValueError("potential lives over a different background")
        return phi.phi
    return np.asarray(phi, dtype=np.float64)


def _weighted_measure(ref, phi, sigma):
    """Nodal density of ``e^{-sigma(u_phi)} omega_phi`` w.r.t. ``omega``."""
    D = ref.grid.diff_op
    dphi = D @ phi
    ratio = 1.0 + 0.5 * (D @ (ref.psi * dphi))
    if not np.all(ratio > 0.0):
        raise DomainError(f"Kahler positivity violated: min ratio {ratio.min():.3e}")
    u_phi = ref.u + 0.5 * ref.psi * dphi
    return np.exp(-sigma.value(u_phi)) * ratio


def weighted_volume_of(ref, phi, sigma):
    """``int e^{-sigma(u_phi)} omega_phi``."""
    return ref.integrate(_weighted_measure(ref, _phi(ref, phi), sigma))


def i_tilde(ref, phi, sigma):
    phi = _phi(ref, phi)
    check_normalized(sigma, ref.grid)
    base = np.exp(-sigma.value(ref.u))
    return ref.integrate(phi * (base - _weighted_measure(ref, phi, sigma))) / AREA


def j_tilde(ref, phi, sigma, path=None, nodes=_GAUSS_NODES):
    """Path integral of the weighted measure defect.

    ``path`` maps ``s`` in [0, 1] to ``(phi_s, dphi_s/ds)``; the default is the
    straight line ``phi_s = s phi``.  Gauss-Legendre in ``s``.
    """
    phi = _phi(ref, phi)
    check_normalized(sigma, ref.grid)
    if path is None:
        def path(s):
            return s * phi, phi
    x, w = np.polynomial.legendre.leggauss(nodes)
    s_nodes = 0.5 * (x + 1.0)
    base = np.exp(-sigma.value(ref.u))
    total = 0.0
    for s, ws in zip(s_nodes, 0.5 * w):
        phi_s, dphi_s = path(s)
        total += ws * ref.integrate(dphi_s * (base - _weighted_measure(ref, phi_s, sigma)))
    return total / AREA


def quadratic_path(phi):
    """``phi_s = s^2 phi`` (used to test path independence of J~)."""
    def path(s):
        return s * s * phi, 2.0 * s * phi
    return path


def log_term(ref, phi):
    """``log((1/V) int e^{h - phi} omega)``."""
    return float(np.log(ref.integrate(np.exp(ref.h - phi)) / AREA))


def f_tilde(ref, phi, sigma, path=None):
    phi = _phi(ref, phi)
    mean = ref.integrate(phi * np.exp(-sigma.value(ref.u))) / AREA
    return j_tilde(ref, phi, sigma, path) - mean - log_term(ref, phi)


def osc(phi):
    phi = np.asarray(getattr(phi, "phi", phi))
    return float(phi.max() - phi.min())


@dataclass(frozen=True)
class FunctionalRecord:
    I_tilde: float
    J_tilde: float
    F_tilde: float
    I_minus_J: float
    osc_phi: float
    path_spec: str = "linear"

    @property
    def fact1_ratio(self):
        """Observed ``I~ / (I~ - J~)``; Fact 1 bounds it by ``m + 2``."""
        if self.I_minus_J <= 0.0:
            return float("nan")
        return self.I_tilde / self.I_minus_J


def functional_record(ref, phi, sigma):
    phi = _phi(ref, phi)
    I = i_tilde(ref, phi, sigma)
    J = j_tilde(ref, phi, sigma)
    mean = ref.integrate(phi * np.exp(-sigma.value(ref.u))) / AREA
    F = J - mean - log_term(ref, phi)
    return FunctionalRecord(I, J, F, I - J, osc(phi))


def cocycle_defect(ref, phi1, phi2, sigma):
    """``|F~_w(phi1) + F~_{w_phi1}(phi2) - F~_w(phi1 + phi2)|``.

    ``phi2`` is given in the canonical moment coordinate of ``omega_phi1``.
    """
    p1 = phi1 if isinstance(phi1, Potential) else Potential(ref, phi1)
    state1 = apply_potential(p1)
    phi2 = _phi(state1, phi2)
    total = p1.phi + pull_back(p1, phi2)
    return abs(f_tilde(ref, p1.phi, sigma) + f_tilde(state1, phi2, sigma) - f_tilde(ref, total, sigma))


def prop1b_sides(trace):
    """Both sides of the F~ identity along a continuity trace.

    Returns ``(t, lhs, rhs)`` arrays; the ``s``-integral of ``I~ - J~`` uses the
    trapezoid rule over the recorded steps.
    """
    steps = trace.steps
    if len(steps) < 10:
        raise DiagnosticError(f"trace has {len(steps)} steps, need at least 10")
    t = np.array([st.t for st in steps])
    imj = np.array([st.I_minus_J for st in steps])
    lhs = np.array([st.F_tilde for st in steps])
    ref = trace.ref
    logs = np.array([log_term(ref, st.phi) for st in steps])
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (imj[1:] + imj[:-1]))))
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = -cum / t - logs
    return t, lhs, rhs


def prop1b_defect(trace, t_min=0.2):
    t, lhs, rhs = prop1b_sides(trace)
    mask = t >= t_min
    return float(np.max(np.abs(lhs[mask] - rhs[mask])))


def fact2_min_slope(trace):
    """Smallest finite-difference slope of ``(I~ - J~)(phi_t)`` in t."""
    t = np.array([st.t for st in trace.steps])
    imj = np.array([st.I_minus_J for st in trace.steps])
    return float(np.min(np.diff(imj) / np.diff(t)))


def m1_fit(trace, t_min=0.5):
    """Empirical constants with ``osc(phi_t) <= C0 (I~ - J~)(phi_t) + C1`` for t >= t_min."""
    pts = [(st.I_minus_J, st.osc) for st in trace.steps if st.t >= t_min]
    if not pts:
        return float("nan"), float("nan")
    x, y = np.array(pts).T
    if len(x) > 1 and np.ptp(x) > 0:
        c0 = max(np.polyfit(x, y, 1)[0], 0.0)
    else:
        c0 = 0.0
    c0 = c0 if c0 > 0 else 1.0
    c1 = float(np.max(y - c0 * x))
    return float(c0), max(c1, 0.0)


def f_upper_bound(trace, t_min=0.25):
    vals = [st.F_tilde for st in trace.steps if st.t >= t_min]
    return float(max(vals)) if vals else float("nan")
