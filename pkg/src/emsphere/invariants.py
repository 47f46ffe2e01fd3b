"""Futaki-type invariant, the field q and the first twisted eigenspace.

For ``V = X`` the invariant reads ``F(X) = int X(h + sigma(u)) e^{-sigma(u)} omega``
and ``X f = -(i/2) psi f'`` on invariant functions, so it is purely
imaginary.  Over a background chart a potential ``phi`` changes the Ricci
potential to ``h - phi - log r + c`` (``r = omega_phi / omega``), which keeps
the integrand free of any re-interpolation; that is the default route of
:func:`futaki_independence_check`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .geometry import MetricState, Potential, apply_potential, box_tilde, box_tilde_matrix, kahler_ratio
from .solver import obstruction


def futaki(state, sigma):
    """``F^sigma_X(X)`` of a canonical state, or of ``omega_phi`` for a :class:`Potential`."""
    if isinstance(state, Potential):
        return _futaki_over_background(state, sigma)
    psi = state.psi
    integrand = -0.5 * psi * (state.dh + sigma.d1(state.u)) * np.exp(-sigma.value(state.u))
    return complex(0.0, state.integrate(integrand))


def _futaki_over_background(p, sigma):
    bg = p.background
    D = bg.grid.diff_op
    r = kahler_ratio(p)
    dphi = D @ p.phi
    u_phi = bg.u + 0.5 * bg.psi * dphi
    # d/dmu (h_phi + sigma(u_phi)) times r, with u_phi' = r
    flux = (bg.dh - dphi + sigma.d1(u_phi) * r) * r - D @ r
    integrand = -0.5 * bg.psi * flux * np.exp(-sigma.value(u_phi))
    return complex(0.0, bg.integrate(integrand))


@dataclass(frozen=True)
class FutakiReport:
    value: complex
    values: tuple
    max_deviation: float
    obstruction_correlation: float
    canonical_values: tuple
    canonical_deviation: float
    tol: float

    @property
    def passed(self):
        return self.max_deviation <= self.tol * (1.0 + abs(self.value))


def _spread(vals):
    vals = np.asarray(vals)
    return float(np.max(np.abs(vals[:, None] - vals[None, :]))) if len(vals) else 0.0


def futaki_independence_check(ref, sigma, potentials, tol=1e-7):
    """Futaki values over ``omega_phi`` for each potential and their spread.

    ``values`` are computed over the background chart; ``canonical_values``
    evaluate the same metrics after re-interpolation to their own moment
    coordinate and are reported only.
    """
    pots = [p if isinstance(p, Potential) else Potential(ref, p) for p in potentials]
    values = [futaki(p, sigma) for p in pots]
    canonical = [futaki(apply_potential(p), sigma) for p in pots]
    value = values[0] if values else futaki(ref, sigma)
    return FutakiReport(
        value=value,
        values=tuple(values),
        max_deviation=_spread(values),
        obstruction_correlation=obstruction(sigma.shifted(-sigma.shift), ref.grid),
        canonical_values=tuple(canonical),
        canonical_deviation=_spread(canonical),
        tol=tol,
    )


def q_field(state, sigma):
    """``q = v + box~ v + X(h + sigma(u))`` with ``v = -i u``; returns ``(q, stddev)``."""
    u = state.u
    box_v = -1j * box_tilde(state, sigma, u)
    x_term = -0.5j * state.psi * (state.dh + sigma.d1(u))
    q = -1j * u + box_v + x_term
    return q, float(np.std(q))


def lambda1_eigenspace(state, sigma, tol=1e-6, target=-1.0):
    """Eigenpairs of the twisted Laplacian with eigenvalue within ``tol`` of ``target``.

    Eigenfields are normalized by ``int f^2 e^{-sigma(u)} omega = 1`` and
    signed to be positive at the north pole.
    """
    B = box_tilde_matrix(state, sigma)
    try:
        evals, evecs = np.linalg.eig(B)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    weight = np.exp(-sigma.value(state.u))
    out = []
    for k in np.argsort(np.abs(evals - target)):
        lam = evals[k]
        if abs(lam - target) > tol:
            break
        if abs(lam.imag) > tol or not _resolved(state.grid, evecs[:, k]):
            continue
        f = np.real_if_close(evecs[:, k], tol=1e6).real
        f = f / np.sqrt(state.integrate(f * f * weight))
        if f[-1] < 0:
            f = -f
        out.append((float(lam.real), f))
    return out


def _resolved(grid, vec):
    """False for modes living in the top Chebyshev band.

    ``psi T_n'`` vanishes at every Lobatto node, so collocation adds a spurious
    null mode built on ``T_n``.
    """
    c = np.abs(grid.coefficients(vec.real)) + np.abs(grid.coefficients(vec.imag))
    band = grid.size * 3 // 4
    return bool(np.sum(c[band:] ** 2) < 0.5 * np.sum(c**2))


def spectrum(state, sigma, count=6):
    """Leading eigenvalues of the twisted Laplacian (closest to zero first)."""
    evals, evecs = np.linalg.eig(box_tilde_matrix(state, sigma))
    order = np.argsort(-evals.real)
    keep = [k for k in order if _resolved(state.grid, evecs[:, k])]
    return evals[keep][:count]


def weighted_inner(state, sigma, f, g):
    return state.integrate(f * g * np.exp(-sigma.value(state.u)))
