"""Built-in invariant checks behind ``emsphere verify``.

Tolerances are the ones the library promises at n >= 48; coarser grids
are allowed to fail.
"""

import numpy as np

from .geometry import (
    AREA,
    apply_potential,
    ibp_defect,
    random_potential,
    recover_potential,
    round_reference,
)
from .grid import build_grid
from .sigma import calibrate, make_sigma, normalize_weight

CATALOG = ("zero", "quad:0.1", "quad:0.5", "quad:1.0", "lin:-1", "neglog:2")
SEED = 20240607


def _check(name, value, tol, kind="le"):
    value = float(value)
    ok = value <= tol if kind == "le" else value >= tol
    return {"name": name, "value": value, "tol": tol, "pass": bool(ok and np.isfinite(value))}


def _geometry(n):
    g = build_grid(n)
    ref = round_reference(g)
    rng = np.random.default_rng(SEED)
    mu = g.nodes
    out = [
        _check("quad_weight_sum", abs(g.quad_weights.sum() - 2.0), 1e-12),
        _check("quad_second_moment", abs(g.quad_weights @ mu**2 - 2.0 / 3.0), 1e-12),
        _check("diff_constant", np.max(np.abs(g.diff_op @ np.ones(g.size))), 1e-12),
        _check("diff_mu_squared", np.max(np.abs(g.diff_op @ mu**2 - 2 * mu)), 1e-10),
    ]
    sig = normalize_weight(make_sigma("quad:0.5"), ref)
    bc = gb = ric = ibp = vol = 0.0
    for _ in range(3):
        p = random_potential(ref, rng, 0.1)
        st = apply_potential(p)
        d = st.dpsi
        bc = max(bc, abs(d[0] - 2.0), abs(d[-1] + 2.0))
        gb = max(gb, abs(st.integrate(st.curvature()) - AREA))
        ric = max(ric, abs(st.integrate(np.exp(st.h)) / AREA - 1.0))
        q = random_potential(ref, rng, 0.3).phi
        ibp = max(ibp, ibp_defect(st, sig, p.phi, q))
        from .functionals import weighted_volume_of

        vol = max(vol, abs(weighted_volume_of(ref, p.phi, sig) / AREA - 1.0))
    out += [
        _check("closure_slopes", bc, 1e-8),
        _check("gauss_bonnet", gb, 1e-8),
        _check("ricci_normalization", ric, 1e-8),
        _check("integration_by_parts", ibp, 1e-9),
        _check("weighted_volume_invariance", vol, 1e-9),
    ]
    return out


def _functionals(n):
    from .functionals import cocycle_defect, f_tilde, functional_record, j_tilde, quadratic_path
    from .solver import direct_solve

    g = build_grid(n)
    ref = round_reference(g)
    rng = np.random.default_rng(SEED)
    sig = normalize_weight(make_sigma("quad:0.5"), ref)
    zero = make_sigma("zero")
    neg = path = coc = classical = 0.0
    ratios = []
    for _ in range(3):
        p = random_potential(ref, rng, 0.3)
        r = functional_record(ref, p, sig)
        neg = max(neg, -r.I_tilde, -r.J_tilde, -r.I_minus_J)
        ratios.append(r.fact1_ratio)
        path = max(path, abs(j_tilde(ref, p.phi, sig) - j_tilde(ref, p.phi, sig, quadratic_path(p.phi))))
        dphi = g.diff_op @ p.phi
        j_classical = ref.integrate(0.5 * ref.psi * dphi * dphi) / (2.0 * AREA)
        classical = max(classical, abs(j_tilde(ref, p.phi, zero) - j_classical))
        p1 = random_potential(ref, rng, 0.1)
        p2 = random_potential(apply_potential(p1), rng, 0.1)
        coc = max(coc, cocycle_defect(ref, p1, p2.phi, sig))
    em = direct_solve(make_sigma("quad:0.5"), g)
    phi_em = recover_potential(ref, em).phi
    crit = 0.0
    eps = 1e-4
    for _ in range(3):
        eta = random_potential(ref, rng, 0.3).phi
        d = (f_tilde(ref, phi_em + eps * eta, sig) - f_tilde(ref, phi_em - eps * eta, sig)) / (2 * eps)
        crit = max(crit, abs(d) / np.max(np.abs(eta)))
    return [
        _check("fact1_nonnegativity", neg, 1e-9),
        _check("j_path_independence", path, 1e-8),
        _check("j_classical_reduction", classical, 1e-9),
        _check("cocycle", coc, 1e-7),
        _check("critical_point", crit, 1e-6),
    ]


def _solver(n):
    from .errors import ContinuityStalled
    from .functionals import fact2_min_slope, prop1b_defect
    from .solver import continuity_solve, direct_solve, obstruction

    g = build_grid(n)
    ref = round_reference(g)
    out = [
        _check("obstruction_lin", abs(obstruction(make_sigma("lin:-1"), g) - 2.0 / np.e), 1e-10),
        _check("obstruction_neglog", abs(obstruction(make_sigma("neglog:2"), g) - 2.0 / 3.0), 1e-10),
    ]
    sigmas = [make_sigma(d) for d in ("zero", "quad:0.1", "quad:0.5", "quad:1.0")]
    sigmas.append(calibrate(make_sigma("neglog:2"), g)[1])
    err = mean = vol = 0.0
    slope = np.inf
    for raw in sigmas:
        sig = normalize_weight(raw, ref)
        pot, tr = continuity_solve(ref, sig)
        err = max(err, np.max(np.abs(apply_potential(pot).psi - direct_solve(raw, g).psi)))
        mean = max(mean, max(st.mean_defect for st in tr.steps))
        vol = max(vol, max(st.volume_defect for st in tr.steps))
        slope = min(slope, fact2_min_slope(tr))
    out += [
        _check("continuity_matches_closed_form", err, 1e-6),
        _check("mean_identity", mean, 1e-8),
        _check("volume_identity", vol, 1e-8),
        _check("fact2_monotonicity", slope, -1e-8, "ge"),
    ]
    try:
        continuity_solve(ref, normalize_weight(make_sigma("lin:-1"), ref))
        stalled = 0.0
    except ContinuityStalled as exc:
        stalled = 1.0 if exc.t_last < 1.0 else 0.0
    out.append(_check("obstructed_path_stalls", stalled, 1.0, "ge"))
    sig = normalize_weight(make_sigma("quad:0.5"), ref)
    d50 = prop1b_defect(continuity_solve(ref, sig, fixed_steps=50)[1])
    d200 = prop1b_defect(continuity_solve(ref, sig, fixed_steps=200)[1])
    out += [
        _check("prop1b_defect_50", d50, 5e-4),
        _check("prop1b_refinement_gain", d50 / max(d200, 1e-300), 4.0, "ge"),
    ]
    return out


def _flow(n):
    from .heat_flow import flow_run, lemma1_monitors

    g = build_grid(n)
    ref = round_reference(g)
    sig = normalize_weight(make_sigma("quad:0.5"), ref)
    rep = lemma1_monitors(flow_run(ref, sig, 1.0, 1e-3))
    return [
        _check("lemma1a_ratio", rep.max_ratio_a, 1.0 + 1e-6),
        _check("lemma1b_ratio", rep.max_ratio_b, 1.0 + 1e-6),
        _check("lemma1c_margin", rep.min_margin_c, -1e-6, "ge"),
        _check("max_principle_slope", rep.max_principle_slope, 1e-6),
        _check("area_preserved", rep.max_area_defect, 1e-10),
        _check("convexity_term", rep.max_convexity_term, 1e-12),
    ]


def _futaki(n):
    from .invariants import futaki, futaki_independence_check, lambda1_eigenspace, q_field, weighted_inner
    from .solver import direct_solve, obstruction

    g = build_grid(n)
    ref = round_reference(g)
    out = []
    worst = 0.0
    for desc in CATALOG:
        rng = np.random.default_rng(SEED)
        sig = make_sigma(desc)
        pots = [random_potential(ref, rng, 0.3) for _ in range(5)]
        rep = futaki_independence_check(ref, sig, pots)
        worst = max(worst, rep.max_deviation / (1.0 + abs(rep.value)))
    out.append(_check("futaki_independence", worst, 1e-7))
    out.append(_check("futaki_lin_value", abs(futaki(ref, make_sigma("lin:-1")) - 4j * np.pi / np.e), 1e-6))
    em = direct_solve(make_sigma("quad:0.5"), g)
    out.append(_check("futaki_vanishes_at_em", abs(futaki(em, make_sigma("quad:0.5"))), 1e-9))
    q, sd = q_field(em, normalize_weight(make_sigma("quad:0.5"), em))
    out.append(_check("q_constancy", sd / (1.0 + np.max(np.abs(q))), 1e-7))
    pairs = lambda1_eigenspace(ref, make_sigma("zero"))
    if pairs:
        lam, f = pairs[0]
        zero = make_sigma("zero")
        mu = g.nodes / np.sqrt(weighted_inner(ref, zero, g.nodes, g.nodes))
        cos = min(1.0, abs(weighted_inner(ref, zero, f, mu)))
        out.append(_check("lambda1_round_eigenvalue", abs(lam + 1.0), 1e-8))
        out.append(_check("lambda1_round_angle", np.arccos(cos), 1e-6))
    else:
        out.append(_check("lambda1_round_eigenvalue", np.inf, 1e-8))
    mismatch = 0.0
    for desc in CATALOG:
        sig = make_sigma(desc)
        fv = futaki(ref, sig).imag
        ob = obstruction(sig, g)
        if (abs(fv) <= 1e-8) != (abs(ob) <= 1e-8) or (abs(ob) > 1e-8 and np.sign(fv) != np.sign(ob)):
            mismatch += 1.0
    out.append(_check("futaki_obstruction_sign", mismatch, 0.0))
    return out


SUITES = {
    "geometry": _geometry,
    "functionals": _functionals,
    "solver": _solver,
    "flow": _flow,
    "futaki": _futaki,
}


def run_suite(name, n=48):
    names = list(SUITES) if name == "all" else [name]
    results = []
    for suite in names:
        try:
            checks = SUITES[suite](n)
        except Exception as exc:  # noqa: BLE001 - a crashed suite is a failed check
            checks = [{"name": f"{suite}_crashed", "value": float("nan"), "tol": 0.0, "pass": False,
                       "error": f"{type(exc).__name__}: {exc}"}]
        for c in checks:
            c["suite"] = suite
        results.extend(checks)
    return results
