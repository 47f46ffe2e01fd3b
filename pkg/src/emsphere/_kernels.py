"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``EMSPHERE_DISABLE_NUMBA`` is not set to a truthy
value; the interpolation kernels additionally fall back to numpy on small
inputs.  Both paths are always importable so the benchmark and the tests can
compare them directly.
"""

import os

import numpy as np

_DISABLE = os.environ.get("EMSPHERE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLE

# below this many node-target pairs the vectorized numpy path wins over the
# one-off cost of loading compiled code
NUMBA_MIN_WORK = 200_000


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def barycentric_eval_numpy(nodes, weights, values, x):
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = weights[None, :] / diff
        out = (kernel @ values) / kernel.sum(axis=1)
    hit_rows, hit_cols = np.nonzero(exact)
    out[hit_rows] = values[hit_cols]
    return out


def invert_monotone_numpy(nodes, weights, vals, dvals, targets, tol=1e-15, max_iter=100):
    """Preimages of ``targets`` under the increasing interpolant of ``vals``.

    ``dvals`` are nodal values of the derivative, interpolated for Newton
    steps.  Each Newton iterate is kept inside a bracket found from the nodal
    values, falling back to bisection when it leaves the bracket.
    """
    targets = np.asarray(targets, dtype=np.float64)
    idx = np.searchsorted(vals, targets, side="left")
    idx = np.clip(idx, 1, len(nodes) - 1)
    lo = nodes[idx - 1].copy()
    hi = nodes[idx].copy()
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        g = barycentric_eval_numpy(nodes, weights, vals, x) - targets
        lo = np.where(g < 0.0, x, lo)
        hi = np.where(g > 0.0, x, hi)
        dg = barycentric_eval_numpy(nodes, weights, dvals, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - g / dg
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        x_new = np.where(bad, 0.5 * (lo + hi), newton)
        x_new = np.where(g == 0.0, x, x_new)
        step = np.abs(x_new - x)
        x = x_new
        if np.all(step <= tol) or np.all(hi - lo <= tol):
            break
    exact_lo = targets <= vals[0]
    exact_hi = targets >= vals[-1]
    x[exact_lo] = nodes[0]
    x[exact_hi] = nodes[-1]
    return x


def _sigma_numpy(s, coeffs, lam, c_log):
    acc = np.zeros_like(s)
    for c in coeffs[::-1]:
        acc = acc * s + c
    if lam != 0.0:
        acc = acc - lam * np.log(s + c_log)
    return acc


def _flow_rhs_numpy(f, D, psi, h, mu, coeffs, lam, c_log):
    df = D @ f
    ratio = 1.0 + 0.5 * (D @ (psi * df))
    if np.any(ratio <= 0.0):
        return None
    u = mu + 0.5 * psi * df
    return np.log(ratio) - h + f - _sigma_numpy(u, coeffs, lam, c_log)


def flow_rk4_numpy(D, psi, h, mu, coeffs, lam, c_log, f0, ds, nsteps):
    """Classical RK4 for the reduced heat flow.

    Returns ``(history, status, fail_step)``; status 0 is success, 1 means
    the Kahler ratio lost positivity, 2 means a non-finite value appeared.
    """
    n = f0.shape[0]
    hist = np.empty((nsteps + 1, n))
    hist[0] = f0
    f = f0.copy()
    for k in range(nsteps):
        k1 = _flow_rhs_numpy(f, D, psi, h, mu, coeffs, lam, c_log)
        if k1 is None:
            return hist[: k + 1], 1, k
        k2 = _flow_rhs_numpy(f + 0.5 * ds * k1, D, psi, h, mu, coeffs, lam, c_log)
        if k2 is None:
            return hist[: k + 1], 1, k
        k3 = _flow_rhs_numpy(f + 0.5 * ds * k2, D, psi, h, mu, coeffs, lam, c_log)
        if k3 is None:
            return hist[: k + 1], 1, k
        k4 = _flow_rhs_numpy(f + ds * k3, D, psi, h, mu, coeffs, lam, c_log)
        if k4 is None:
            return hist[: k + 1], 1, k
        f = f + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(f)):
            return hist[: k + 1], 2, k
        hist[k + 1] = f
    return hist, 0, nsteps


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True)
    def _bary_point(nodes, weights, values, x):
        num = 0.0
        den = 0.0
        for j in range(nodes.shape[0]):
            d = x - nodes[j]
            if d == 0.0:
                return values[j]
            k = weights[j] / d
            num += k * values[j]
            den += k
        return num / den

    @numba.njit(cache=True)
    def barycentric_eval_numba(nodes, weights, values, x):
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            out[i] = _bary_point(nodes, weights, values, x[i])
        return out

    @numba.njit(cache=True)
    def _invert_monotone_numba(nodes, weights, vals, dvals, targets, tol, max_iter):
        m = nodes.shape[0]
        out = np.empty(targets.shape[0])
        for i in range(targets.shape[0]):
            y = targets[i]
            if y <= vals[0]:
                out[i] = nodes[0]
                continue
            if y >= vals[m - 1]:
                out[i] = nodes[m - 1]
                continue
            j = np.searchsorted(vals, y)
            if j < 1:
                j = 1
            lo = nodes[j - 1]
            hi = nodes[j]
            x = 0.5 * (lo + hi)
            for _ in range(max_iter):
                g = _bary_point(nodes, weights, vals, x) - y
                if g == 0.0:
                    break
                if g < 0.0:
                    lo = x
                else:
                    hi = x
                dg = _bary_point(nodes, weights, dvals, x)
                xn = x - g / dg
                if not (xn > lo and xn < hi):
                    xn = 0.5 * (lo + hi)
                step = abs(xn - x)
                x = xn
                if step <= tol or hi - lo <= tol:
                    break
            out[i] = x
        return out

    def invert_monotone_numba(nodes, weights, vals, dvals, targets, tol=1e-15, max_iter=100):
        return _invert_monotone_numba(
            nodes, weights, vals, dvals, np.ascontiguousarray(targets, dtype=np.float64), tol, max_iter
        )

    @numba.njit(cache=True)
    def _matvec(A, x, out):
        n = A.shape[0]
        for i in range(n):
            acc = 0.0
            for j in range(A.shape[1]):
                acc += A[i, j] * x[j]
            out[i] = acc

    @numba.njit(cache=True)
    def _flow_rhs_numba(f, D, psi, h, mu, coeffs, lam, c_log, df, tmp, ratio, out):
        n = f.shape[0]
        _matvec(D, f, df)
        for i in range(n):
            tmp[i] = psi[i] * df[i]
        _matvec(D, tmp, ratio)
        for i in range(n):
            r = 1.0 + 0.5 * ratio[i]
            if r <= 0.0:
                return False
            u = mu[i] + 0.5 * tmp[i]
            sig = 0.0
            for k in range(coeffs.shape[0] - 1, -1, -1):
                sig = sig * u + coeffs[k]
            if lam != 0.0:
                sig -= lam * np.log(u + c_log)
            out[i] = np.log(r) - h[i] + f[i] - sig
        return True

    @numba.njit(cache=True)
    def _flow_rk4_numba(D, psi, h, mu, coeffs, lam, c_log, f0, ds, nsteps):
        n = f0.shape[0]
        hist = np.empty((nsteps + 1, n))
        hist[0] = f0
        f = f0.copy()
        stage = np.empty(n)
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        df = np.empty(n)
        tmp = np.empty(n)
        ratio = np.empty(n)
        for k in range(nsteps):
            if not _flow_rhs_numba(f, D, psi, h, mu, coeffs, lam, c_log, df, tmp, ratio, k1):
                return hist[: k + 1].copy(), 1, k
            for i in range(n):
                stage[i] = f[i] + 0.5 * ds * k1[i]
            if not _flow_rhs_numba(stage, D, psi, h, mu, coeffs, lam, c_log, df, tmp, ratio, k2):
                return hist[: k + 1].copy(), 1, k
            for i in range(n):
                stage[i] = f[i] + 0.5 * ds * k2[i]
            if not _flow_rhs_numba(stage, D, psi, h, mu, coeffs, lam, c_log, df, tmp, ratio, k3):
                return hist[: k + 1].copy(), 1, k
            for i in range(n):
                stage[i] = f[i] + ds * k3[i]
            if not _flow_rhs_numba(stage, D, psi, h, mu, coeffs, lam, c_log, df, tmp, ratio, k4):
                return hist[: k + 1].copy(), 1, k
            finite = True
            for i in range(n):
                f[i] = f[i] + (ds / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not np.isfinite(f[i]):
                    finite = False
            if not finite:
                return hist[: k + 1].copy(), 2, k
            hist[k + 1] = f
        return hist, 0, nsteps

    def flow_rk4_numba(D, psi, h, mu, coeffs, lam, c_log, f0, ds, nsteps):
        return _flow_rk4_numba(
            np.ascontiguousarray(D), psi, h, mu, np.asarray(coeffs, dtype=np.float64),
            float(lam), float(c_log), np.asarray(f0, dtype=np.float64), float(ds), int(nsteps),
        )

else:  # pragma: no cover
    barycentric_eval_numba = barycentric_eval_numpy
    invert_monotone_numba = invert_monotone_numpy
    flow_rk4_numba = flow_rk4_numpy


def barycentric_eval(nodes, weights, values, x):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if USE_NUMBA and len(nodes) * len(x) >= NUMBA_MIN_WORK:
        return barycentric_eval_numba(nodes, weights, np.ascontiguousarray(values, dtype=np.float64), x)
    return barycentric_eval_numpy(nodes, weights, values, x)


def invert_monotone(nodes, weights, vals, dvals, targets):
    if USE_NUMBA and len(nodes) * len(targets) >= NUMBA_MIN_WORK:
        return invert_monotone_numba(nodes, weights, vals, dvals, targets)
    return invert_monotone_numpy(nodes, weights, vals, dvals, targets)


def flow_rk4(D, psi, h, mu, coeffs, lam, c_log, f0, ds, nsteps):
    if USE_NUMBA:
        return flow_rk4_numba(D, psi, h, mu, coeffs, lam, c_log, f0, ds, nsteps)
    return flow_rk4_numpy(D, psi, h, mu, np.asarray(coeffs, dtype=np.float64), lam, c_log, f0, ds, nsteps)
