"""Smoothing heat flow with the Lemma 1 monitors and the Lemma 2 diagnostic.

The flow of a potential ``f`` over ``eta_0 = omega_phi`` is

    df/ds = log(eta_f / eta_0) - h_{eta_0} + f - sigma(u_{eta_f}).

Everything is evaluated in the moment coordinate of the background ``bg``:
the flow over ``omega_phi`` is the flow of ``F = phi + f`` over ``bg`` with
``sigma`` shifted by the normalizing constant of ``h_{omega_phi}``, so no
re-interpolation happens along the way.  In that chart

* ``box~_s g = (psi g')' / (2 r) - sigma'(u_F) psi g' / 2`` with ``r = 1 + (psi F')'/2``;
* ``|grad g|^2_s = psi g'^2 / (2 r)``;
* ``h_s + sigma(u_s) = h - F - log r + c_F + sigma(u_F)``.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FlowBreakdown, FlowStepError
from .geometry import AREA
from .sigma import check_normalized

MAX_HALVINGS = 4


@dataclass(frozen=True, eq=False)
class FlowTrace:
    background: object
    sigma: object
    ds: float
    s: np.ndarray
    f: np.ndarray  # (steps + 1, nodes), flow potential over omega_phi
    phi: np.ndarray  # starting potential over the background
    fdot: np.ndarray
    fdot_sup: np.ndarray
    grad_fdot_sup: np.ndarray
    lemma1a_ratio: np.ndarray
    lemma1b_ratio: np.ndarray
    lemma1c_margin: np.ndarray
    h_plus_sigma: np.ndarray
    h_plus_sigma_sup: np.ndarray
    gauge_spread: np.ndarray  # spatial spread of c_s = h_s + sigma(u_s) + fdot
    area: np.ndarray
    convexity_term_max: np.ndarray
    halvings: int

    @property
    def steps(self):
        return len(self.s) - 1


class _Chart:
    def __init__(self, bg, sigma):
        self.bg = bg
        self.sigma = sigma
        self.D = bg.grid.diff_op
        self.psi = bg.psi

    def geometry(self, F):
        dF = self.D @ F
        r = 1.0 + 0.5 * (self.D @ (self.psi * dF))
        u = self.bg.u + 0.5 * self.psi * dF
        return r, u

    def ricci_shift(self, F):
        """``c_F`` with ``h_F = h - F - log r + c_F`` and ``int e^{h_F} omega_F = V``."""
        return -np.log(self.bg.integrate(np.exp(self.bg.h - F)) / AREA)

    def h_plus_sigma(self, F):
        r, u = self.geometry(F)
        return self.bg.h - F - np.log(r) + self.ricci_shift(F) + self.sigma.value(u)

    def box(self, F, g):
        r, u = self.geometry(F)
        dg = self.D @ g
        return 0.5 * (self.D @ (self.psi * dg)) / r - 0.5 * self.sigma.d1(u) * self.psi * dg

    def grad_sq(self, F, g):
        r, _ = self.geometry(F)
        dg = self.D @ g
        return 0.5 * self.psi * dg * dg / r


def _run_kernel(chart, phi, shift, s_max, ds):
    bg = chart.bg
    coeffs, lam, c_log = chart.sigma.shifted(shift).kernel_params()
    nsteps = int(round(s_max / ds))
    if nsteps < 1 or abs(nsteps * ds - s_max) > 1e-9 * max(1.0, s_max):
        raise FlowStepError(f"s_max={s_max} is not a whole number of steps of ds={ds}")
    D = np.ascontiguousarray(bg.grid.diff_op)
    hist, status, k = _kernels.flow_rk4(
        D, np.ascontiguousarray(bg.psi), np.ascontiguousarray(bg.h), np.ascontiguousarray(bg.u),
        np.ascontiguousarray(coeffs), float(lam), float(c_log), np.array(phi, dtype=np.float64), float(ds), nsteps,
    )
    return hist, status, k, nsteps


def _unstable(grid, hist):
    """Growth of the top Chebyshev band relative to the whole signal flags an RK4 blow-up."""
    if not np.all(np.isfinite(hist)):
        return True
    band = grid.size * 3 // 4
    start = grid.coefficients(hist[0])
    end = grid.coefficients(hist[-1])
    scale = max(np.max(np.abs(end)), np.max(np.abs(start)), 1e-300)
    return bool(np.max(np.abs(end[band:])) > max(1e-6 * scale, 100.0 * np.max(np.abs(start[band:])), 1e-8))


def flow_run(bg, sigma, s_max=1.0, ds=1e-3, phi=None):
    """Run the flow from ``f = 0`` over ``omega_phi`` (``phi = 0`` means over ``bg``).

    ``ds`` is halved (up to four times) when the explicit scheme goes
    unstable; loss of Kahler positivity raises :class:`FlowBreakdown`.
    """
    check_normalized(sigma, bg.grid)
    chart = _Chart(bg, sigma)
    n = bg.grid.size
    phi = np.zeros(n) if phi is None else np.asarray(getattr(phi, "phi", phi), dtype=np.float64)
    # the flow over omega_phi carries the normalizing constant of h_phi
    shift = chart.ricci_shift(phi)
    halvings = 0
    while True:
        hist, status, k, nsteps = _run_kernel(chart, phi, shift, s_max, ds)
        if status == 0 and not _unstable(bg.grid, hist):
            break
        if status == 1:
            raise FlowBreakdown(k * ds)
        halvings += 1
        if halvings > MAX_HALVINGS:
            raise FlowStepError(f"heat flow unstable down to ds={ds:.3e}")
        ds *= 0.5

    s = ds * np.arange(nsteps + 1)
    F = hist
    f = F - phi
    steps = nsteps + 1
    fdot = np.empty((steps, n))
    hps = np.empty((steps, n))
    box_fdot = np.empty((steps, n))
    grad = np.empty((steps, n))
    area = np.empty(steps)
    conv = np.empty(steps)
    spread = np.empty(steps)
    for j in range(steps):
        r, u = chart.geometry(F[j])
        hs = chart.h_plus_sigma(F[j])
        fdot[j] = np.log(r) - bg.h + F[j] - chart.sigma.value(u) - shift
        hps[j] = hs
        box_fdot[j] = chart.box(F[j], fdot[j])
        grad[j] = chart.grad_sq(F[j], fdot[j])
        area[j] = bg.integrate(r)
        # sigma'' (Xbar fdot)^2 with Xbar fdot = (i/2) psi fdot'
        xb = 0.5 * bg.psi * (chart.D @ fdot[j])
        conv[j] = np.max(chart.sigma.d2(u) * -(xb * xb))
        c = hs + fdot[j]
        spread[j] = np.ptp(c)
    base = np.max(np.abs(fdot[0]))
    fdot_sup = np.max(np.abs(fdot), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if base > 0.0:
            ratio_a = fdot_sup / (np.exp(s) * base)
            ratio_b = np.max(fdot * fdot + s[:, None] * grad, axis=1) / (np.exp(2 * s) * base * base)
        else:
            ratio_a = np.zeros(steps)
            ratio_b = np.zeros(steps)
    # (c): box~_s(h_s + sigma) = -box~_s fdot
    margin_c = np.min(-box_fdot, axis=1) - np.exp(s) * np.min(-box_fdot[0])
    return FlowTrace(
        background=bg, sigma=sigma, ds=ds, s=s, f=f, phi=phi, fdot=fdot,
        fdot_sup=fdot_sup, grad_fdot_sup=np.max(grad, axis=1),
        lemma1a_ratio=ratio_a, lemma1b_ratio=ratio_b, lemma1c_margin=margin_c,
        h_plus_sigma=hps, h_plus_sigma_sup=np.max(np.abs(hps), axis=1),
        gauge_spread=spread, area=area, convexity_term_max=conv, halvings=halvings,
    )


@dataclass(frozen=True)
class Lemma1Report:
    max_ratio_a: float
    max_ratio_b: float
    min_margin_c: float
    max_principle_slope: float  # largest increase of e^{-s} |fdot| per unit s
    max_area_defect: float
    max_convexity_term: float
    trivial: bool

    @property
    def pass_a(self):
        return self.trivial or self.max_ratio_a <= 1.0 + 1e-6

    @property
    def pass_b(self):
        return self.trivial or self.max_ratio_b <= 1.0 + 1e-6

    @property
    def pass_c(self):
        return self.trivial or self.min_margin_c >= -1e-6

    @property
    def passed(self):
        return self.pass_a and self.pass_b and self.pass_c

    def as_dict(self):
        out = dict(self.__dict__)
        out.update(pass_a=self.pass_a, pass_b=self.pass_b, pass_c=self.pass_c)
        return out


def lemma1_monitors(trace):
    trivial = bool(np.max(np.abs(trace.fdot[0])) == 0.0)
    damped = np.exp(-trace.s) * trace.fdot_sup
    slope = float(np.max(np.diff(damped) / np.diff(trace.s))) if trace.steps else 0.0
    return Lemma1Report(
        max_ratio_a=float(np.max(trace.lemma1a_ratio)),
        max_ratio_b=float(np.max(trace.lemma1b_ratio)),
        min_margin_c=float(np.min(trace.lemma1c_margin)),
        max_principle_slope=slope,
        max_area_defect=float(np.max(np.abs(trace.area - AREA))),
        max_convexity_term=float(np.max(trace.convexity_term_max)),
        trivial=trivial,
    )


@dataclass(frozen=True)
class Lemma2Row:
    t: float
    one_minus_t: float
    v_sup: float
    h0_sup: float


@dataclass(frozen=True)
class Lemma2Table:
    rows: tuple
    exponent: float  # least-squares slope of log|v| against log(1 - t), t < 1

    @property
    def decreasing(self):
        v = [r.v_sup for r in self.rows]
        return all(b < a for a, b in zip(v, v[1:]))


def lemma2_diagnostic(sigma, ref, t_list, s_max=1.0, ds=1e-3, opts=None):
    """Tabulate ``|v|_{C^0}`` after unit-time flow on ``omega_{phi_t}``.

    ``v`` is ``h_1 + sigma(u_1)`` minus its ``e^{-sigma(u_1)} eta_1`` mean.
    """
    from .solver import ContinuityOptions, continuity_solve

    t_list = sorted(float(t) for t in t_list)
    stops = tuple(t for t in t_list if 0.0 < t < 1.0)
    if opts is None:
        opts = ContinuityOptions(stops=stops, record_functionals=False)
    else:
        from dataclasses import replace

        opts = replace(opts, stops=stops, record_functionals=False)
    _, trace = continuity_solve(ref, sigma, opts)
    chart = _Chart(ref, sigma)
    rows = []
    for t in t_list:
        phi_t = trace.at(t).phi
        ft = flow_run(ref, sigma, s_max, ds, phi=phi_t)
        F1 = phi_t + ft.f[-1]
        r, u = chart.geometry(F1)
        w = ref.area_element * np.exp(-sigma.value(u)) * r
        hs = ft.h_plus_sigma[-1]
        v = hs - (w @ hs) / (w @ np.ones_like(hs))
        rows.append(Lemma2Row(t, 1.0 - t, float(np.max(np.abs(v))), float(np.max(np.abs(ft.h_plus_sigma[0])))))
    pts = [(np.log(r.one_minus_t), np.log(r.v_sup)) for r in rows if r.t < 1.0 and r.v_sup > 0]
    if len(pts) >= 2:
        x, y = np.array(pts).T
        exponent = float(np.polyfit(x, y, 1)[0])
    else:
        exponent = float("nan")
    return Lemma2Table(tuple(rows), exponent)
