"""Einstein-Mabuchi metrics: closed form, obstruction and the continuity method.

In moment coordinates the equation ``Ric(omega) + i dd-bar sigma(u) = omega``
becomes ``-psi'' + (sigma' psi)' = 2`` with the closure conditions at the
poles.  Its first integral ``psi' = sigma' psi - 2 mu`` integrates to

    psi(mu) = -2 e^{sigma(mu)} int_{-1}^{mu} nu e^{-sigma(nu)} d nu,

which closes up at the north pole iff ``int nu e^{-sigma(nu)} d nu = 0``.

The continuity path solves, for t in [0, 1],

    omega_phi / omega = exp(h - t phi + sigma(u_phi))

over a reference metric by damped Newton with a tangent predictor.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContinuityStalled, DegenerateSolution, NoSolutionObstruction
from .functionals import functional_record
from .geometry import AREA, Potential, metric_from_profile
from .grid import build_grid
from .sigma import check_normalized

OBSTRUCTION_TOL = 1e-8

_default_grid = None


def _grid_or_default(grid):
    global _default_grid
    if grid is not None:
        return grid
    if _default_grid is None:
        _default_grid = build_grid(64)
    return _default_grid


def obstruction(sigma, grid=None):
    """``O(sigma) = int_{-1}^{1} nu e^{-sigma(nu)} d nu``."""
    grid = _grid_or_default(grid)
    mu = grid.nodes
    return grid.integrate(mu * np.exp(-sigma.value(mu)))


def em_profile(sigma, grid):
    """Closed-form profile; closes smoothly at the north pole only if the obstruction vanishes."""
    mu = grid.nodes
    return -2.0 * np.exp(sigma.value(mu)) * grid.antiderivative(mu * np.exp(-sigma.value(mu)))


def em_residual(state, sigma):
    """Sup norm of ``-psi'' + (sigma'(mu) psi)' - 2``."""
    D = state.grid.diff_op
    psi = state.psi
    res = -(D @ (D @ psi)) + D @ (sigma.d1(state.grid.nodes) * psi) - 2.0
    return float(np.max(np.abs(res)))


def direct_solve(sigma, grid=None):
    grid = _grid_or_default(grid)
    obs = obstruction(sigma, grid)
    if abs(obs) > OBSTRUCTION_TOL:
        raise NoSolutionObstruction(obs)
    psi = em_profile(sigma, grid)
    if np.any(psi[1:-1] <= 0.0):
        raise DegenerateSolution("closed-form profile is not positive in the interior")
    return metric_from_profile(grid, psi)


# ---------------------------------------------------------------------------
# continuity method
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityOptions:
    t_step_init: float = 0.05
    t_step_min: float = 1e-4
    newton_tol: float = 1e-10
    max_newton: int = 30
    max_backtrack: int = 30
    easy_iters: int = 3
    easy_streak: int = 3
    t_step_max: float = 0.25
    fixed_steps: int | None = None  # uniform schedule with this many steps
    stops: tuple = ()  # t values that must be hit exactly
    record_functionals: bool = True


@dataclass(frozen=True, eq=False)
class ContinuityStep:
    t: float
    phi: np.ndarray
    phidot: np.ndarray
    newton_iters: int
    residual_sup: float
    I_tilde: float
    J_tilde: float
    F_tilde: float
    I_minus_J: float
    osc: float
    mean_defect: float
    volume_defect: float


@dataclass(eq=False)
class ContinuityTrace:
    ref: object
    sigma: object
    options: ContinuityOptions
    steps: list = field(default_factory=list)
    outcome: str = "running"
    rejected: int = 0

    @property
    def t(self):
        return np.array([st.t for st in self.steps])

    def at(self, t, tol=1e-12):
        for st in self.steps:
            if abs(st.t - t) <= tol:
                return st
        raise KeyError(f"no step recorded at t={t}")

    @property
    def last(self):
        return self.steps[-1]


class _System:
    """Nodal residual of the continuity equation and its Jacobian."""

    def __init__(self, ref, sigma):
        self.ref = ref
        self.sigma = sigma
        g = ref.grid
        self.D = g.diff_op
        self.psi = ref.psi
        self.L = 0.5 * (self.D @ (self.psi[:, None] * self.D))
        self.w = g.quad_weights

    def parts(self, phi):
        dphi = self.D @ phi
        u_phi = self.ref.u + 0.5 * self.psi * dphi
        ratio = 1.0 + self.L @ phi
        return u_phi, ratio

    def residual(self, phi, t):
        u_phi, ratio = self.parts(phi)
        with np.errstate(over="ignore"):
            E = np.exp(self.ref.h - t * phi + self.sigma.value(u_phi))
        return ratio - E, E, u_phi, ratio

    def jacobian(self, phi, t, E, u_phi):
        sd = self.sigma.d1(u_phi)
        dlog = (0.5 * sd * self.psi)[:, None] * self.D - t * np.eye(len(phi))
        return self.L - E[:, None] * dlog

    def gauge_row(self, u_phi, ratio):
        """Weights of ``int phi e^{-sigma(u_phi)} omega_phi`` (frozen at the current iterate)."""
        return self.w * np.exp(-self.sigma.value(u_phi)) * ratio


def _lstsq(A, b, rcond):
    x, *_ = np.linalg.lstsq(A, b, rcond=rcond)
    return x


def _linear_solve(sysm, J, rhs, t, phi, u_phi, ratio):
    if t == 0.0:
        # constants and T_n are in the kernel; border with the weighted-mean gauge
        # and pin the top Chebyshev coefficient
        row = sysm.gauge_row(u_phi, ratio)
        top = sysm.ref.grid.to_coeffs[-1]
        scale = np.max(np.abs(J))
        A = np.vstack([J, scale * row / np.max(np.abs(row)), scale * top / np.max(np.abs(top))])
        return _lstsq(A, np.concatenate([rhs, [0.0, 0.0]]), 1e-13)
    if t > 1.0 - 1e-3:
        # the first eigenmode of the twisted Laplacian becomes singular at t = 1
        return _lstsq(J, rhs, 1e-11)
    return np.linalg.solve(J, rhs)


def _start(sysm):
    """Exact t = 0 solution.

    ``omega_phi e^{-sigma(u_phi)} = e^h omega`` reads ``e^{-sigma(u)} du = e^{h} d mu``,
    so ``G(u_phi) = H(mu)`` with ``G = int e^{-sigma}`` and ``H = int e^h``
    (both weights have total mass 2 when sigma is normalized, up to the
    truncation error removed by rescaling ``H``).  The potential follows from
    ``phi' = 2 (u_phi - mu) / psi`` and the gauge
    ``int phi e^{-sigma(u_phi)} omega_phi = 0``.

    Solving this collocated in ``phi`` by Newton is ill-posed: the t = 0
    operator also annihilates ``T_n``, since ``psi T_n'`` vanishes at every node.
    """
    ref, sigma = sysm.ref, sysm.sigma
    grid = ref.grid
    mu = grid.nodes
    res0 = sysm.residual(np.zeros(grid.size), 0.0)[0]
    if np.max(np.abs(res0)) <= 1e-14:
        return np.zeros(grid.size), 0, float(np.max(np.abs(res0)))
    D = grid.diff_op
    G = grid.antiderivative(np.exp(-sigma.value(mu)))
    H = grid.antiderivative(np.exp(ref.h))
    H *= G[-1] / H[-1]
    u_phi = _kernels.invert_monotone(mu, grid.bary_weights, G, np.exp(-sigma.value(mu)), H)
    u_phi[0], u_phi[-1] = -1.0, 1.0
    g = u_phi - mu
    dphi = np.empty_like(g)
    dphi[1:-1] = 2.0 * g[1:-1] / sysm.psi[1:-1]
    # poles: u_phi' = r = e^{h + sigma(u_phi)} (G'/H' ratio), psi' = -+2
    du = np.exp(ref.h + sigma.value(u_phi)) * (G[-1] / grid.integrate(np.exp(ref.h)))
    dpsi = D @ sysm.psi
    dphi[0] = 2.0 * (du[0] - 1.0) / dpsi[0]
    dphi[-1] = 2.0 * (du[-1] - 1.0) / dpsi[-1]
    phi = grid.antiderivative(dphi)
    u_c, ratio = sysm.parts(phi)
    if not (np.all(ratio > 0.0) and np.all(np.diff(u_c) > 0.0) and np.all(np.isfinite(phi))):
        return None
    row = sysm.gauge_row(u_c, ratio)
    phi -= (row @ phi) / row.sum()
    res = sysm.residual(phi, 0.0)[0]
    return phi, 0, float(np.max(np.abs(res)))


def _newton(sysm, phi, t, opts):
    """Damped Newton for t > 0; returns ``(phi, iters, residual)`` or ``None`` on failure."""
    res, E, u_phi, ratio = sysm.residual(phi, t)
    norm = np.max(np.abs(res))
    for it in range(opts.max_newton + 1):
        if norm <= opts.newton_tol:
            return phi, it, norm
        if it == opts.max_newton or not np.isfinite(norm):
            return None
        J = sysm.jacobian(phi, t, E, u_phi)
        delta = _linear_solve(sysm, J, -res, t, phi, u_phi, ratio)
        if not np.all(np.isfinite(delta)):
            return None
        alpha = 1.0
        for _ in range(opts.max_backtrack):
            trial = phi + alpha * delta
            r_t, E_t, u_t, ratio_t = sysm.residual(trial, t)
            n_t = np.max(np.abs(r_t))
            ok = np.all(ratio_t > 0.0) and np.all(np.diff(u_t) > 0.0) and np.isfinite(n_t)
            if ok and (n_t < (1.0 - 1e-4 * alpha) * norm or n_t <= opts.newton_tol):
                break
            alpha *= 0.5
        else:
            return None
        phi, res, E, u_phi, ratio, norm = trial, r_t, E_t, u_t, ratio_t, n_t
    return None


def _tangent(sysm, phi, t):
    """``dphi/dt`` from differentiating the equation in t: ``J phidot = -E phi``."""
    res, E, u_phi, ratio = sysm.residual(phi, t)
    J = sysm.jacobian(phi, t, E, u_phi)
    if t > 1.0 - 1e-3:
        # J is (nearly) singular along the first eigenmode; append the weighted-mean
        # relation int (phi + t phidot) e^{-sigma(u_phi)} omega_phi = 0 that the
        # differentiated equation implies
        row = sysm.gauge_row(u_phi, ratio)
        scale = np.max(np.abs(J)) / np.max(np.abs(row))
        A = np.vstack([J, scale * row])
        b = np.concatenate([-E * phi, [-scale * (row @ phi) / t]])
        return _lstsq(A, b, 1e-11)
    return _linear_solve(sysm, J, -E * phi, t, phi, u_phi, ratio)


def _record(trace, sysm, phi, t, iters, resid):
    ref, sigma = trace.ref, trace.sigma
    phidot = _tangent(sysm, phi, t)
    u_phi, ratio = sysm.parts(phi)
    # mean identity int (phi + t phidot) e^{-sigma(u_phi)} omega_phi = 0
    mean_defect = abs(2.0 * np.pi * float(sysm.gauge_row(u_phi, ratio) @ (phi + t * phidot))) / AREA
    vol = ref.integrate(np.exp(ref.h - t * phi + sigma.value(u_phi)))
    volume_defect = abs(vol / AREA - 1.0)
    if trace.options.record_functionals:
        rec = functional_record(ref, phi, sigma)
        vals = (rec.I_tilde, rec.J_tilde, rec.F_tilde, rec.I_minus_J, rec.osc_phi)
    else:
        vals = (np.nan, np.nan, np.nan, np.nan, float(phi.max() - phi.min()))
    frozen = np.array(phi)
    frozen.setflags(write=False)
    phidot.setflags(write=False)
    trace.steps.append(ContinuityStep(t, frozen, phidot, iters, resid, *vals, mean_defect, volume_defect))


def continuity_solve(ref, sigma, opts=None, **kw):
    """Follow the continuity path from t = 0 to t = 1.

    Returns ``(Potential, ContinuityTrace)``; raises :class:`ContinuityStalled`
    (carrying the partial trace) when the step size underflows.
    """
    if opts is None:
        opts = ContinuityOptions(**kw)
    elif kw:
        raise TypeError("pass either opts or keyword options")
    check_normalized(sigma, ref.grid)
    sysm = _System(ref, sigma)
    trace = ContinuityTrace(ref, sigma, opts)
    n = ref.grid.size

    def stall(t_last, phi):
        trace.outcome = "stalled"
        # the obstruction is quoted for sigma without its normalizing shift
        raw = sigma.shifted(-sigma.shift)
        raise ContinuityStalled(trace, t_last, float(phi.max() - phi.min()), obstruction(raw, ref.grid))

    sol = _start(sysm)
    if sol is None:
        stall(0.0, np.zeros(n))
    phi, iters, resid = sol
    _record(trace, sysm, phi, 0.0, iters, resid)

    if opts.fixed_steps:
        schedule = list(np.linspace(0.0, 1.0, opts.fixed_steps + 1)[1:])
    else:
        schedule = None
    stops = sorted(float(s) for s in opts.stops if 0.0 < s < 1.0) + [1.0]

    t = 0.0
    dt = opts.t_step_init
    streak = 0
    while t < 1.0:
        phidot = trace.last.phidot
        if schedule is not None:
            t_next = schedule[len(trace.steps) - 1]
        else:
            target = next(s for s in stops if s > t + 1e-14)
            t_next = min(t + dt, target)
            if target - t_next < 0.25 * opts.t_step_min:
                t_next = target
        guess = phi + (t_next - t) * phidot
        sol = _newton(sysm, guess, t_next, opts)
        if sol is None:
            trace.rejected += 1
            streak = 0
            if schedule is not None:
                stall(t, phi)
            dt = 0.5 * (t_next - t)
            if dt < opts.t_step_min:
                stall(t, phi)
            continue
        phi, iters, resid = sol
        t = t_next
        _record(trace, sysm, phi, t, iters, resid)
        if iters <= opts.easy_iters:
            streak += 1
            if streak >= opts.easy_streak:
                dt = min(2.0 * dt, opts.t_step_max)
                streak = 0
        else:
            streak = 0
    trace.outcome = "converged"
    return Potential(ref, phi), trace
