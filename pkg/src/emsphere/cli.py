"""Command-line interface: ``emsphere <command> [options]``.

Every command prints one JSON document on stdout.  Exit codes: 0 ok,
1 internal error or failed verification, 2 stalled solver or nonzero
obstruction, 3 invalid configuration.
"""

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    CalibrationError,
    ConfigurationError,
    ContinuityStalled,
    DomainError,
    FlowBreakdown,
    NoSolutionObstruction,
)
from .geometry import Potential, apply_potential, push_forward, random_potential, recover_potential, round_reference
from .grid import build_grid
from .sigma import calibrate, make_sigma, normalize_weight

EXIT_OK, EXIT_FAIL, EXIT_STALLED, EXIT_CONFIG = 0, 1, 2, 3
RECORD_FIELDS = (
    "config", "outcome", "obstruction", "futaki_re", "futaki_im", "I_tilde", "J_tilde",
    "F_tilde", "osc", "residual_sup", "steps", "wall_time_ms",
)
PROFILE_COLUMNS = ("mu", "psi", "u", "h", "phi")
ZERO_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    sigma_descriptor: str
    grid_n: int = 64
    method: str = "continuity"
    t_step_init: float = 0.05
    newton_tol: float = 1e-10
    ds: float = 1e-3
    s_max: float = 1.0
    seed: int = 0
    json_path: str | None = None
    csv_path: str | None = None

    def validate(self):
        if self.grid_n < 8:
            raise ConfigurationError(f"grid must be >= 8, got {self.grid_n}")
        for name in ("t_step_init", "newton_tol", "ds", "s_max"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.method not in ("continuity", "flow", "direct"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        make_sigma(self.sigma_descriptor)

    def echo(self):
        out = asdict(self)
        out.pop("json_path")
        out.pop("csv_path")
        return out


def _finite(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _emit(doc, path=None):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _write_profile(path, state, phi_canonical):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for row in zip(state.grid.nodes, state.psi, state.u, state.h, phi_canonical):
            w.writerow([repr(float(v)) for v in row])


def _record(cfg, outcome, t0, obstruction=None, futaki=None, rec=None, residual=None, steps=0):
    out = {
        "config": cfg.echo(),
        "outcome": outcome,
        "obstruction": _finite(obstruction),
        "futaki_re": _finite(futaki.real) if futaki is not None else None,
        "futaki_im": _finite(futaki.imag) if futaki is not None else None,
        "I_tilde": _finite(rec.I_tilde) if rec else None,
        "J_tilde": _finite(rec.J_tilde) if rec else None,
        "F_tilde": _finite(rec.F_tilde) if rec else None,
        "osc": _finite(rec.osc_phi) if rec else None,
        "residual_sup": _finite(residual),
        "steps": int(steps),
        "wall_time_ms": round((time.perf_counter() - t0) * 1e3, 3),
    }
    assert tuple(out) == RECORD_FIELDS
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(cfg):
    from .functionals import functional_record
    from .heat_flow import flow_run
    from .invariants import futaki
    from .solver import ContinuityOptions, continuity_solve, direct_solve, em_residual, obstruction

    t0 = time.perf_counter()
    cfg.validate()
    raw = make_sigma(cfg.sigma_descriptor)
    grid = build_grid(cfg.grid_n)
    ref = round_reference(grid)
    sigma = normalize_weight(raw, ref)
    obs = obstruction(raw, grid)

    if cfg.method == "direct":
        try:
            state = direct_solve(raw, grid)
        except NoSolutionObstruction:
            _emit(_record(cfg, "no-solution-obstruction", t0, obs, futaki(ref, raw)), cfg.json_path)
            return EXIT_STALLED
        pot = recover_potential(ref, state)
        rec = functional_record(ref, pot, sigma)
        residual, steps = em_residual(state, raw), 1
        outcome = "converged"
    elif cfg.method == "continuity":
        opts = ContinuityOptions(t_step_init=cfg.t_step_init, newton_tol=cfg.newton_tol)
        try:
            pot, trace = continuity_solve(ref, sigma, opts)
        except ContinuityStalled as exc:
            last = exc.trace.steps[-1] if exc.trace.steps else None
            rec = functional_record(ref, last.phi, sigma) if last else None
            doc = _record(cfg, "stalled", t0, obs, futaki(ref, raw), rec, last.residual_sup if last else None,
                          len(exc.trace.steps))
            _emit(doc, cfg.json_path)
            return EXIT_STALLED
        state = apply_potential(pot)
        rec = functional_record(ref, pot, sigma)
        residual, steps = trace.last.residual_sup, len(trace.steps)
        outcome = "converged"
    else:
        try:
            tr = flow_run(ref, sigma, cfg.s_max, cfg.ds)
        except FlowBreakdown:
            _emit(_record(cfg, "stalled", t0, obs, futaki(ref, raw)), cfg.json_path)
            return EXIT_STALLED
        pot = Potential(ref, tr.f[-1])
        state = apply_potential(pot)
        rec = functional_record(ref, pot, sigma)
        hs = tr.h_plus_sigma[-1]
        residual = float(np.ptp(hs))  # h + sigma(u) is constant exactly at a solution
        steps = tr.steps
        outcome = "converged" if residual <= cfg.newton_tol * 1e4 else "stalled"

    # the invariant is the same on every metric of the class; the reference is best resolved
    fut = futaki(ref, raw)
    doc = _record(cfg, outcome, t0, obs, fut, rec, residual, steps)
    if cfg.csv_path:
        phi_c = push_forward(pot, pot.phi) if np.ptp(pot.phi) > 0 else pot.phi
        _write_profile(cfg.csv_path, state, phi_c)
    _emit(doc, cfg.json_path)
    return EXIT_OK if outcome == "converged" else EXIT_STALLED


def cmd_obstruction(args):
    from .solver import obstruction

    t0 = time.perf_counter()
    sigma = make_sigma(args.sigma)
    value = obstruction(sigma, build_grid(args.grid))
    _emit({"sigma": args.sigma, "grid": args.grid, "obstruction": value,
           "vanishes": abs(value) <= ZERO_TOL, "wall_time_ms": _ms(t0)})
    return EXIT_OK if abs(value) <= ZERO_TOL else EXIT_STALLED


def _ms(t0):
    return round((time.perf_counter() - t0) * 1e3, 3)


def cmd_futaki(args):
    from .invariants import futaki_independence_check

    t0 = time.perf_counter()
    sigma = make_sigma(args.sigma)
    grid = build_grid(args.grid)
    ref = round_reference(grid)
    rng = np.random.default_rng(args.seed)
    pots = [Potential(ref, np.zeros(grid.size))]
    pots += [random_potential(ref, rng, args.amp) for _ in range(args.samples)]
    rep = futaki_independence_check(ref, sigma, pots)
    _emit({
        "sigma": args.sigma, "grid": args.grid, "seed": args.seed,
        "futaki_re": rep.value.real, "futaki_im": rep.value.imag,
        "values_im": [v.imag for v in rep.values],
        "max_deviation": rep.max_deviation,
        "independent": rep.passed,
        "canonical_chart_deviation": rep.canonical_deviation,
        "obstruction": rep.obstruction_correlation,
        "wall_time_ms": _ms(t0),
    })
    if not rep.passed:
        return EXIT_FAIL
    return EXIT_OK if abs(rep.value) <= ZERO_TOL else EXIT_STALLED


def cmd_calibrate(args):
    from .solver import obstruction

    t0 = time.perf_counter()
    base = make_sigma(args.sigma)
    grid = build_grid(args.grid)
    try:
        a, cal = calibrate(base, grid)
    except CalibrationError as exc:
        _emit({"sigma": args.sigma, "error": str(exc), "wall_time_ms": _ms(t0)})
        return EXIT_STALLED
    _emit({"sigma": args.sigma, "a_star": a, "calibrated_poly": list(cal.poly),
           "calibrated_log_shift": cal.log_shift, "obstruction": obstruction(cal, grid),
           "wall_time_ms": _ms(t0)})
    return EXIT_OK


def cmd_flow(args):
    from .heat_flow import flow_run, lemma1_monitors

    t0 = time.perf_counter()
    grid = build_grid(args.grid)
    ref = round_reference(grid)
    sigma = normalize_weight(make_sigma(args.sigma), ref)
    try:
        tr = flow_run(ref, sigma, args.s_max, args.ds)
    except FlowBreakdown as exc:
        _emit({"sigma": args.sigma, "outcome": "breakdown", "s": exc.s, "wall_time_ms": _ms(t0)})
        return EXIT_STALLED
    rep = lemma1_monitors(tr)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "fdot_sup", "grad_fdot_sup", "lemma1a_ratio", "lemma1b_ratio", "lemma1c_margin"])
            for row in zip(tr.s, tr.fdot_sup, tr.grad_fdot_sup, tr.lemma1a_ratio, tr.lemma1b_ratio, tr.lemma1c_margin):
                w.writerow([repr(float(v)) for v in row])
    doc = {"sigma": args.sigma, "grid": args.grid, "ds": tr.ds, "s_max": args.s_max, "steps": tr.steps}
    doc.update({k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in rep.as_dict().items()})
    doc["wall_time_ms"] = _ms(t0)
    _emit(doc)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_eigen(args):
    from .invariants import lambda1_eigenspace, spectrum
    from .solver import direct_solve

    t0 = time.perf_counter()
    grid = build_grid(args.grid)
    raw = make_sigma(args.sigma)
    if args.state == "em":
        try:
            state = direct_solve(raw, grid)
        except NoSolutionObstruction as exc:
            _emit({"sigma": args.sigma, "outcome": "no-solution-obstruction", "obstruction": exc.value,
                   "wall_time_ms": _ms(t0)})
            return EXIT_STALLED
    else:
        state = round_reference(grid)
    sigma = normalize_weight(raw, state)
    pairs = lambda1_eigenspace(state, sigma, args.tol)
    spec = spectrum(state, sigma, args.count)
    _emit({
        "sigma": args.sigma, "state": args.state, "grid": args.grid,
        "lambda1": [{"eigenvalue": lam, "field": list(map(float, f))} for lam, f in pairs],
        "spectrum_re": [float(z.real) for z in spec],
        "spectrum_im": [float(z.imag) for z in spec],
        "wall_time_ms": _ms(t0),
    })
    return EXIT_OK


def cmd_scan(args):
    from .functionals import functional_record
    from .solver import direct_solve

    t0 = time.perf_counter()
    grid = build_grid(args.grid)
    raw = make_sigma(args.sigma)
    try:
        em = direct_solve(raw, grid)
    except NoSolutionObstruction as exc:
        _emit({"sigma": args.sigma, "outcome": "no-solution-obstruction", "obstruction": exc.value,
               "wall_time_ms": _ms(t0)})
        return EXIT_STALLED
    sigma = normalize_weight(raw, em)
    rng = np.random.default_rng(args.seed)
    rows = []
    for amp in args.amps:
        count = 1 if amp == 0 else args.samples
        for k in range(count):
            if amp == 0:
                phi = np.zeros(grid.size)
            else:
                phi = random_potential(em, rng, amp).phi
            r = functional_record(em, phi, sigma)
            rows.append({"index": len(rows), "amp": amp, "J_tilde": r.J_tilde, "F_tilde": r.F_tilde,
                         "I_tilde": r.I_tilde, "osc": r.osc_phi, "I_minus_J": r.I_minus_J})
    J = np.array([r["J_tilde"] for r in rows])
    F = np.array([r["F_tilde"] for r in rows])
    if len(rows) > 1 and np.ptp(J) > 0:
        A = float(np.polyfit(J, F, 1)[0])
    else:
        A = 0.0
    B = float(np.max(A * J - F)) if len(rows) else 0.0
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    _emit({
        "sigma": args.sigma, "grid": args.grid, "seed": args.seed, "samples": len(rows),
        "fit_A": A, "fit_B": B, "min_F_tilde": float(F.min()),
        "min_I_minus_J": float(min(r["I_minus_J"] for r in rows)),
        "wall_time_ms": _ms(t0),
    })
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_suite

    t0 = time.perf_counter()
    results = run_suite(args.suite, args.grid)
    failed = [r["name"] for r in results if not r["pass"]]
    _emit({"suite": args.suite, "grid": args.grid, "results": results, "failed": failed,
           "wall_time_ms": _ms(t0)})
    return EXIT_OK if not failed else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _amps(text):
    try:
        return [float(a) for a in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad amplitude list {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="emsphere", description="Einstein-Mabuchi metrics on the rotation-symmetric two-sphere.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, sigma=True):
        if sigma:
            sp.add_argument("--sigma", required=True, help="zero | lin:<a> | quad:<eps> | neglog:<C> | poly:<c0>,...")
        sp.add_argument("--grid", type=int, default=64, help="polynomial degree n (n + 1 nodes)")

    sp = sub.add_parser("solve", help="solve for the Einstein-Mabuchi metric")
    common(sp)
    sp.add_argument("--method", choices=("continuity", "flow", "direct"), default="continuity")
    sp.add_argument("--t-step-init", type=float, default=0.05)
    sp.add_argument("--newton-tol", type=float, default=1e-10)
    sp.add_argument("--ds", type=float, default=1e-3)
    sp.add_argument("--s-max", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--json", dest="json_path")
    sp.add_argument("--csv", dest="csv_path", help="profile table with columns mu, psi, u, h, phi")

    sp = sub.add_parser("verify", help="run the built-in invariant checks")
    sp.add_argument("--suite", choices=("geometry", "functionals", "solver", "flow", "futaki", "all"), default="all")
    sp.add_argument("--grid", type=int, default=48)

    sp = sub.add_parser("scan", help="sample functionals around the Einstein-Mabuchi metric")
    common(sp)
    sp.add_argument("--amps", type=_amps, default=[0.1, 0.3, 0.5])
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv")

    sp = sub.add_parser("obstruction", help="the obstruction integral")
    common(sp)

    sp = sub.add_parser("futaki", help="Futaki-type invariant over random metrics in the class")
    common(sp)
    sp.add_argument("--samples", type=int, default=5)
    sp.add_argument("--amp", type=float, default=0.3)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("calibrate", help="find a with zero obstruction for sigma + a*s")
    common(sp)

    sp = sub.add_parser("flow", help="heat flow from the round metric with Lemma 1 monitors")
    common(sp)
    sp.add_argument("--ds", type=float, default=1e-3)
    sp.add_argument("--s-max", type=float, default=1.0)
    sp.add_argument("--csv")

    sp = sub.add_parser("eigen", help="first eigenspace of the twisted Laplacian")
    common(sp)
    sp.add_argument("--state", choices=("round", "em"), default="round")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--count", type=int, default=6)
    return p


def _dispatch(args):
    if args.command == "solve":
        cfg = RunConfig(args.sigma, args.grid, args.method, args.t_step_init, args.newton_tol,
                        args.ds, args.s_max, args.seed, args.json_path, args.csv_path)
        return cmd_solve(cfg)
    if getattr(args, "grid", 64) < 8:
        raise ConfigurationError(f"grid must be >= 8, got {args.grid}")
    return {
        "verify": cmd_verify, "scan": cmd_scan, "obstruction": cmd_obstruction, "futaki": cmd_futaki,
        "calibrate": cmd_calibrate, "flow": cmd_flow, "eigen": cmd_eigen,
    }[args.command](args)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"emsphere: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"emsphere: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
