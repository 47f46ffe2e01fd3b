"""S^1-invariant Kahler geometry of the two-sphere in momentum-profile form.

A metric is described by its momentum profile ``psi`` on the moment
interval: ``g = d mu^2 / psi + psi d theta^2`` and ``omega = d mu ^ d theta``,
so every metric in the class pushes forward to ``2 pi d mu`` and has area
``4 pi``.  In these coordinates, for invariant functions ``f(mu)``:

* ``Delta f = (psi f')' / 2`` and ``|grad f|^2 = psi f'^2 / 2``;
* the holomorphic field ``X`` with Hamiltonian ``u = mu`` acts as
  ``X f = -(i/2) psi f'`` and ``Xbar f = (i/2) psi f'``;
* adding a potential ``phi`` gives ``omega_phi / omega = 1 + (psi phi')' / 2``
  and the new Hamiltonian ``u_phi = mu + psi phi' / 2``;
* ``Ric(omega) = K omega`` with ``K = -psi'' / 2``.

Smooth closure at the poles means ``psi(+-1) = 0`` and ``psi'(+-1) = -+2``.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalError
from .grid import Grid

AREA = 4.0 * np.pi


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricState:
    grid: Grid
    psi: np.ndarray
    u: np.ndarray
    h: np.ndarray
    dh: np.ndarray  # h' from the first integral, sharper than D @ h on rough profiles

    @property
    def area_element(self):
        """Quadrature weights of the pushforward measure ``2 pi d mu``."""
        return 2.0 * np.pi * self.grid.quad_weights

    def integrate(self, f):
        """``int_M f omega`` for an invariant function given at the nodes."""
        return float(self.area_element @ f)

    @property
    def dpsi(self):
        return self.grid.diff_op @ self.psi

    def curvature(self):
        return -0.5 * (self.grid.diff_op @ self.dpsi)


@dataclass(frozen=True, eq=False)
class Potential:
    """An invariant Kahler potential over ``background``, sampled at its nodes."""

    background: MetricState
    phi: np.ndarray

    def __post_init__(self):
        phi = _readonly(self.phi)
        if phi.shape != (self.background.grid.size,):
            raise ValueError(f"potential has shape {phi.shape}, grid needs {(self.background.grid.size,)}")
        object.__setattr__(self, "phi", phi)


def as_potential(bg, phi):
    if isinstance(phi, Potential):
        return phi
    return Potential(bg, np.asarray(phi, dtype=np.float64))


def metric_from_profile(grid, psi):
    psi = np.array(psi, dtype=np.float64)
    psi[0] = psi[-1] = 0.0
    h, dh = _ricci_potential(grid, psi)
    return MetricState(grid, _readonly(psi), _readonly(grid.nodes), _readonly(h), _readonly(dh))


def round_reference(grid):
    """Unit round sphere: ``psi = 1 - mu^2``, ``h = 0``."""
    mu = grid.nodes
    psi = 1.0 - mu * mu
    zero = _readonly(np.zeros_like(mu))
    return MetricState(grid, _readonly(psi), _readonly(mu), zero, zero)


def _ricci_potential(grid, psi):
    mu = grid.nodes
    if np.any(psi[1:-1] <= 0.0):
        raise DomainError("momentum profile is not positive in the interior")
    D = grid.diff_op
    dpsi = D @ psi
    d2psi = D @ dpsi
    dh = np.empty_like(psi)
    dh[1:-1] = (-dpsi[1:-1] - 2.0 * mu[1:-1]) / psi[1:-1]
    # removable singularity at the poles
    dh[0] = (-d2psi[0] - 2.0) / dpsi[0]
    dh[-1] = (-d2psi[-1] - 2.0) / dpsi[-1]
    h = grid.antiderivative(dh)
    # int e^h omega = V
    h -= np.log(grid.integrate(np.exp(h)) / 2.0)
    return h, dh


def ricci_potential(state):
    """Ricci potential ``h`` with ``Ric - omega = i dd-bar h`` and ``int e^h omega = V``.

    Uses the first integral ``psi h' = -psi' - 2 mu`` (the constant vanishes by
    the closure condition at the south pole); at the poles ``h'`` is the
    one-sided limit ``(-psi'' - 2) / psi'``.
    """
    return _ricci_potential(state.grid, state.psi)[0]


def box_tilde_matrix(state, sigma):
    """Matrix of ``f -> (1/2) e^{sigma} (e^{-sigma} psi f')'`` at the nodes."""
    D = state.grid.diff_op
    psi = state.psi
    sd = sigma.d1(state.u)
    return 0.5 * (D @ (psi[:, None] * D)) - 0.5 * (sd * psi)[:, None] * D


def box_tilde(state, sigma, f):
    """Twisted Laplacian ``Delta f + i sigma'(u) Xbar f = (psi f')'/2 - sigma'(u) psi f'/2``."""
    D = state.grid.diff_op
    df = D @ f
    return 0.5 * (D @ (state.psi * df)) - 0.5 * sigma.d1(state.u) * state.psi * df


def gradient_norm_sq(state, f):
    df = state.grid.diff_op @ f
    return 0.5 * state.psi * df * df


def ibp_defect(state, sigma, f, g):
    """``|int (grad f, grad g) e^{-sigma} omega + int f box~ g e^{-sigma} omega|`` for real fields."""
    D = state.grid.diff_op
    weight = np.exp(-sigma.value(state.u))
    lhs = state.integrate(0.5 * state.psi * (D @ f) * (D @ g) * weight)
    rhs = state.integrate(f * box_tilde(state, sigma, g) * weight)
    return abs(lhs + rhs)


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

def kahler_ratio(p):
    """``omega_phi / omega = 1 + (psi phi')' / 2`` at the background nodes."""
    bg = p.background
    D = bg.grid.diff_op
    return 1.0 + 0.5 * (D @ (bg.psi * (D @ p.phi)))


def is_admissible(p, margin=0.0):
    return bool(np.all(kahler_ratio(p) > margin))


def _check_positive(p):
    r = kahler_ratio(p)
    if not np.all(r > 0.0):
        raise DomainError(f"Kahler positivity violated: min(omega_phi/omega) = {r.min():.3e}")
    return r


def hamiltonian_of_potential(p):
    """``u_phi = u - i Xbar phi = mu + psi phi' / 2`` on the background nodes."""
    _check_positive(p)
    bg = p.background
    u_phi = bg.u + 0.5 * bg.psi * (bg.grid.diff_op @ p.phi)
    if np.any(np.diff(u_phi) <= 0.0):
        raise DomainError("Hamiltonian of omega_phi is not increasing in the moment coordinate")
    return u_phi


@dataclass(frozen=True, eq=False)
class MomentChart:
    """How the moment coordinate of ``omega_phi`` sits over the background one."""

    u_tilde: np.ndarray  # new moment coordinate at background nodes
    ratio: np.ndarray  # d u_tilde / d mu = omega_phi / omega
    preimages: np.ndarray  # background mu of each canonical node


def moment_chart(p):
    bg = p.background
    grid = bg.grid
    ratio = _check_positive(p)
    u_tilde = hamiltonian_of_potential(p)
    if abs(u_tilde[0] + 1.0) > 1e-12 or abs(u_tilde[-1] - 1.0) > 1e-12:
        raise NumericalError("moment map of omega_phi does not cover [-1, 1]")
    u_tilde = u_tilde.copy()
    u_tilde[0], u_tilde[-1] = -1.0, 1.0
    pre = _kernels.invert_monotone(grid.nodes, grid.bary_weights, u_tilde, ratio, grid.nodes)
    pre[0], pre[-1] = -1.0, 1.0
    if np.any(np.diff(pre) <= 0.0) or not np.all(np.isfinite(pre)):
        raise NumericalError("re-interpolation to canonical moment coordinates failed")
    return MomentChart(u_tilde, ratio, pre)


def apply_potential(p):
    """Canonical :class:`MetricState` of ``omega_phi``.

    The new profile is ``psi_phi(u_tilde) = psi(mu) * d u_tilde / d mu``; it
    is re-sampled at the canonical nodes through the preimages of the
    monotone map ``mu -> u_tilde``.
    """
    if not np.any(p.phi - p.phi[0]):
        return p.background
    chart = moment_chart(p)
    bg = p.background
    grid = bg.grid
    new_psi = grid.interp(bg.psi * chart.ratio, chart.preimages)
    return metric_from_profile(grid, new_psi)


def push_forward(p, f):
    """Express a background field in the moment coordinate of ``omega_phi``."""
    chart = moment_chart(p)
    return p.background.grid.interp(f, chart.preimages)


def pull_back(p, g):
    """Express a field given in the moment coordinate of ``omega_phi`` over the background."""
    bg = p.background
    u_tilde = hamiltonian_of_potential(p)
    return bg.grid.interp(g, u_tilde)


def recover_potential(bg, state, anchor=0.0, tol=1e-14, max_iter=50):
    """Potential over ``bg`` whose metric has the canonical profile of ``state``.

    The profile alone fixes the metric only up to the flow of ``Re X``
    (translations of ``log|w|``), so the image ``u_phi`` of the centre node is
    prescribed by ``anchor``.  The returned potential has zero mean.
    """
    grid = bg.grid
    mu = grid.nodes
    D = grid.diff_op
    m = grid.center_index
    psi = bg.psi
    tpsi = state.psi
    tdpsi = D @ tpsi
    U = mu.copy()
    U[m] = anchor
    rows = np.ones(grid.size, dtype=bool)
    rows[[0, m, -1]] = False
    for _ in range(max_iter):
        res = psi * (D @ U) - grid.interp(tpsi, U)
        res[~rows] = 0.0
        res[m] = U[m] - anchor
        J = psi[:, None] * D - np.diag(grid.interp(tdpsi, U))
        J[[0, -1]] = 0.0
        J[0, 0] = J[-1, -1] = 1.0
        J[m] = 0.0
        J[m, m] = 1.0
        delta = np.linalg.solve(J, -res)
        U = U + delta
        U[0], U[-1] = -1.0, 1.0
        if np.max(np.abs(delta)) <= tol:
            break
    else:
        raise NumericalError("potential recovery did not converge")
    g = U - mu
    dphi = np.empty_like(g)
    dphi[1:-1] = 2.0 * g[1:-1] / psi[1:-1]
    dg = D @ g
    dpsi = D @ psi
    dphi[0] = 2.0 * dg[0] / dpsi[0]
    dphi[-1] = 2.0 * dg[-1] / dpsi[-1]
    phi = grid.antiderivative(dphi)
    phi -= grid.integrate(phi) / 2.0
    return Potential(bg, phi)


def random_potential(bg, rng, amp, degree=10, margin=0.05, max_tries=1000):
    """Seeded smooth invariant potential, rejection-sampled for positivity.

    A truncated Chebyshev series whose k-th coefficient is uniform in
    ``[-amp 2^-k, amp 2^-k]``.
    """
    from numpy.polynomial import chebyshev as C

    grid = bg.grid
    scale = amp * 2.0 ** -np.arange(1, degree + 1)
    for _ in range(max_tries):
        coeffs = np.concatenate(([0.0], rng.uniform(-1.0, 1.0, degree) * scale))
        p = Potential(bg, C.chebval(grid.nodes, coeffs))
        if is_admissible(p, margin):
            return p
    raise DomainError(f"no admissible potential found at amplitude {amp}")
