"""Command-line front end.

Subcommands: roots, check, resolve-theta, resolve-t, invert-sum, solve,
verify, oracle-compare.  Exit status is 0 on success, 1 on input errors and
2 on numerical failures (divergence, spectral violation, eigenvalue hits).
"""

import argparse
import json
import os
import sys

import numpy as np

from .analysis_checks import kato_convexity_check, mihlin_scan, run_bound_suite
from .core_grids import (Field, Params, XFunction, field_norm, load_field_csv,
                         load_xfunction_csv, make_t_grid, make_theta_grid, save_field_csv,
                         save_xfunction_csv, x_norm)
from .exceptions import (ConfigurationError, DivergenceError, DomainError,
                         EigenvalueProximityError, IngestionError, PreconditionError,
                         RegionTooSmallError, SpectralViolationError, TruncationError)
from .fadle_spectra import (check_condition, find_roots, separation_report,
                            spectral_constants, tau_of)
from .perturbation_pipeline import (build_rhs, edge_traces, estimate_rho0, reconstruct_u,
                                    residual, solve)
from .resolvent_t import resolve_l1
from .resolvent_theta import oracle_bvp, resolve_a
from .sum_inverter import build_contour, invert_sum

__all__ = ["main", "load_config", "DEFAULT_CONFIG", "LOADS"]

SCHEMA = 1
INPUT_ERRORS = (ConfigurationError, DomainError, PreconditionError, IngestionError,
                OSError, ValueError, KeyError, json.JSONDecodeError)
NUMERIC_ERRORS = (DivergenceError, SpectralViolationError, EigenvalueProximityError,
                  RegionTooSmallError, TruncationError, ArithmeticError)

DEFAULT_CONFIG = {
    "schema": SCHEMA,
    "params": {"omega": np.pi / 2, "mu": None, "p": 2.0, "k": 1.0, "rho": 1.0,
               "tolerances": {"quad_tol": 1e-10, "newton_tol": 1e-12,
                              "neumann_tol": 1e-8, "residual_tol": 1e-6}},
    "grids": {"theta": {"n": 128, "clustering": 0.5},
              "t": {"n": 128, "t_max": 20.0, "grading": "exponential"}},
    "contour": {"n_nodes": 256, "theta0": None},
    "spectral": {"eps_l1": 0.1, "eps_l2": 0.3, "eps0": None, "roots": 10},
    "rho0": {"estimate": True, "power_steps": 4},
    "seed": 0,
}

# sector loads f(x, y)
LOADS = {
    "zero": lambda x, y: np.zeros_like(x),
    "uniform": lambda x, y: np.ones_like(x),
    "bilinear": lambda x, y: 1 + x * y,
    "gaussian": lambda x, y: np.exp(-((x - 0.4) ** 2 + (y - 0.4) ** 2) / 0.05),
}

# theta data (F1, F2); F1 is clamped
THETA_DATA = {
    "bump": lambda th, w: (th ** 2 * (w - th) ** 2, np.sin(np.pi * th / w)),
    "smooth": lambda th, w: (np.sin(np.pi * th / w) ** 2 * np.cos(th), np.ones_like(th)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _merge(base, extra, path=""):
    out = dict(base)
    for key, value in extra.items():
        if key not in base:
            raise ConfigurationError(f"unknown configuration key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict) and key != "tolerances":
            out[key] = _merge(base[key], value, path + key + ".")
        elif key == "tolerances":
            unknown = set(value) - set(base[key])
            if unknown:
                raise ConfigurationError(f"unknown tolerance(s) {sorted(unknown)}")
            out[key] = {**base[key], **value}
        else:
            out[key] = value
    return out


def load_config(path=None):
    """Defaults merged with a JSON file; unknown keys are errors."""
    if path is None:
        return _merge(DEFAULT_CONFIG, {})
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema", SCHEMA) != SCHEMA:
        raise ConfigurationError(f"unsupported config schema {data.get('schema')}")
    return _merge(DEFAULT_CONFIG, data)


def _workers(args):
    if getattr(args, "workers", None):
        return max(1, int(args.workers))
    env = os.environ.get("SECTORSUM_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path, data):
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True)
    if path is None or path == "-":
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _setup(cfg):
    params = Params.from_dict(cfg["params"])
    sp = cfg["spectral"]
    table = find_roots(int(sp["roots"]), params.tolerances.newton_tol)
    consts = spectral_constants(params.omega, sp["eps_l1"], sp["eps_l2"], sp["eps0"])
    g = cfg["grids"]
    th = make_theta_grid(params.omega, int(g["theta"]["n"]), g["theta"]["clustering"])
    tg = make_t_grid(float(g["t"]["t_max"]), int(g["t"]["n"]), g["t"]["grading"],
                     residual_tol=params.tolerances.residual_tol)
    return params, consts, table, th, tg


def _field_rhs(source, params, tg, th):
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in LOADS:
            raise IngestionError(f"unknown builtin load {name!r}; choose from {sorted(LOADS)}")
        return build_rhs(LOADS[name], params, tg, th)
    F = load_field_csv(source, params.omega)
    return F


# subcommands

def cmd_roots(args):
    table = find_roots(args.count, args.newton_tol)
    if args.json:
        _write_json(None, {"schema": SCHEMA, "tau": table.tau, "roots": table.to_records(),
                           "winding_total": table.winding_total, "region": table.region})
    else:
        print(f"{'j':>3} {'branch':>6} {'Re z':>18} {'Im z':>18} {'residual':>10}")
        for j, (z, b, r) in enumerate(zip(table.roots, table.branch_tags, table.residuals), 1):
            print(f"{j:>3} {b:>6} {z.real:18.12f} {z.imag:18.12f} {r:10.2e}")
        print(f"tau = {table.tau:.10f}")
    return 0


def cmd_check(args):
    table = find_roots(args.roots)
    tau = tau_of(table)
    prod = args.omega * args.mu
    ok = check_condition(args.omega, args.mu, table)
    if ok:
        print(f"OK: ωμ = {prod:.4f} < τ = {tau:.4f}")
    else:
        print(f"FAIL: ωμ ≥ τ ({prod:.4f} ≥ {tau:.4f})")
    if args.verbose:
        params = Params(omega=args.omega, mu=args.mu)
        rep = separation_report(params, table, spectral_constants(args.omega))
        print(f"eigenvalue margin Re sqrt(lambda) - |mu| = {rep['min_operator_margin']:.4g}")
    return 0 if ok else 2


def _theta_input(args):
    if args.rhs.startswith("builtin:"):
        name = args.rhs.split(":", 1)[1]
        if name not in THETA_DATA:
            raise IngestionError(f"unknown builtin data {name!r}; choose from {sorted(THETA_DATA)}")
        grid = make_theta_grid(args.omega, args.n)
        F1, F2 = THETA_DATA[name](grid.nodes, args.omega)
        return XFunction(F1, F2, grid)
    return load_xfunction_csv(args.rhs, args.omega)


def cmd_resolve_theta(args):
    lam = complex(args.lam)
    F = _theta_input(args)
    out = resolve_a(lam, F, eps0=args.eps0, method=args.method)
    if args.out:
        save_xfunction_csv(args.out, out)
    print(f"||(A - lambda)^-1 F||_X = {x_norm(out):.10g}  (||F||_X = {x_norm(F):.10g})")
    return 0


def cmd_resolve_t(args):
    lam = complex(args.lam)
    if args.rhs.startswith("builtin:"):
        th = make_theta_grid(args.omega, args.n_theta)
        tg = make_t_grid(args.t_max, args.n_t)
        R = Field.from_functions(lambda t, x: t * np.exp(-t) * x ** 2 * (args.omega - x) ** 2,
                                 lambda t, x: t * np.exp(-2 * t) * np.sin(x), tg, th)
    else:
        R = load_field_csv(args.rhs, args.omega)
    V = resolve_l1(lam, R, args.mu)
    if args.out:
        save_field_csv(args.out, V)
    print(f"||(L1 - lambda)^-1 R||_E = {field_norm(V):.10g}  (||R||_E = {field_norm(R):.10g})")
    return 0


def cmd_invert_sum(args):
    cfg = load_config(args.config)
    params, consts, table, th, tg = _setup(cfg)
    F = _field_rhs(args.rhs, params, tg, th)
    contour = build_contour(params, consts, table, int(cfg["contour"]["n_nodes"]),
                            cfg["contour"]["theta0"])
    info = {}
    V = invert_sum(F, contour, params, consts, info, workers=_workers(args))
    if args.out:
        save_field_csv(args.out, V)
    report = {"schema": SCHEMA, "config": cfg, "contour": {k: v for k, v in contour.to_dict().items()
                                                           if not k.startswith("nodes")},
              "imag_ratio": info["imag_ratio"], "norm": field_norm(V, params.p)}
    _write_json(args.report, report)
    return 0


def cmd_solve(args):
    cfg = load_config(args.config)
    params, consts, table, th, tg = _setup(cfg)
    F = _field_rhs(args.rhs, params, tg, th)
    workers = _workers(args)
    contour = build_contour(params, consts, table, int(cfg["contour"]["n_nodes"]),
                            cfg["contour"]["theta0"])
    report = {"schema": SCHEMA, "config": cfg, "spectral": {
        "tau": table.tau, "gate": check_condition(params.omega, params.mu, table),
        "eps0": consts.eps0, "theta0": contour.theta0}}
    if cfg["rho0"]["estimate"] and field_norm(F) > 0:
        info = {}
        rho0 = estimate_rho0(params, consts, table, F, contour,
                             int(cfg["rho0"]["power_steps"]), info=info, workers=workers)
        report["rho0"] = rho0
        report["gain"] = info.get("gain", 0.0)
        report["contraction"] = params.k * params.rho ** 2 * info.get("gain", 0.0)
    rep = {}
    V = solve(F, params, consts, table, contour, report=rep, workers=workers)
    report["iterations"] = rep["solve"].iterations
    report["corrections"] = rep["solve"].corrections
    report["observed_ratio"] = rep["solve"].ratio
    report["residual"] = residual(V, F, params)
    report["traces"] = edge_traces(V, params)
    if args.out:
        samples = reconstruct_u(V, params)
        samples.save_csv(args.out)
    if args.field_out:
        save_field_csv(args.field_out, V)
    _write_json(args.report, report)
    return 0


def cmd_verify(args):
    suites = ["mihlin", "kato", "bounds"] if args.suite == "all" else [args.suite]
    report = {"schema": SCHEMA, "seed": args.seed}
    ok = True
    if "mihlin" in suites:
        rows = []
        for r in (0.5, 1.0, 2.0):
            rep = {}
            sm, sd = mihlin_scan(r, report=rep)
            good = abs(sm - r / 2) <= 0.01 * r / 2 and abs(sd - 3 * r / 32) <= 0.01 * 3 * r / 32
            rep["passed"] = good
            ok &= good
            rows.append(rep)
        report["mihlin"] = rows
    if "kato" in suites:
        rep = kato_convexity_check(seed=args.seed)
        ok &= rep["passed"]
        report["kato"] = rep
    if "bounds" in suites:
        rep = run_bound_suite(seed=args.seed, workers=_workers(args))
        ok &= rep["passed"]
        report["bounds"] = rep
    report["passed"] = bool(ok)
    _write_json(args.report, report)
    if args.report not in (None, "-"):
        print("PASS" if ok else "FAIL")
    return 0 if ok else 2


def cmd_oracle_compare(args):
    lam = complex(args.lam)
    omega = args.omega
    if args.rhs not in THETA_DATA:
        raise IngestionError(f"unknown builtin data {args.rhs!r}; choose from {sorted(THETA_DATA)}")
    grid = make_theta_grid(omega, args.n_theta)
    F1, F2 = THETA_DATA[args.rhs](grid.nodes, omega)
    F = XFunction(F1, F2, grid)
    got = resolve_a(lam, F, eps0=args.eps0, method=args.method)
    f1 = lambda x: THETA_DATA[args.rhs](x, omega)[0]
    f2 = lambda x: THETA_DATA[args.rhs](x, omega)[1]
    ref = oracle_bvp(lam, f1, f2, args.n, omega, grid=grid)
    err = x_norm(got - ref) / x_norm(ref)
    print(f"relative X-norm difference = {err:.3e}")
    return 0 if err <= args.tol else 2


def build_parser():
    p = _Parser(prog="sectorsum", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("roots", help="complex roots of sinh z = +-z and the threshold tau")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--newton-tol", type=float, default=1e-12)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_roots)

    s = sub.add_parser("check", help="spectral gate omega * mu < tau")
    s.add_argument("--omega", type=float, required=True)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--roots", type=int, default=10)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("resolve-theta", help="(A - lambda)^-1 F on a theta grid")
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--omega", type=float, default=np.pi / 2)
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--rhs", default="builtin:bump")
    s.add_argument("--eps0", type=float, default=1.0)
    s.add_argument("--method", choices=["auto", "explicit", "direct"], default="auto")
    s.add_argument("--out")
    s.set_defaults(func=cmd_resolve_theta)

    s = sub.add_parser("resolve-t", help="(L1 - lambda)^-1 R on the half line")
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--mu", type=float, default=2.0)
    s.add_argument("--omega", type=float, default=np.pi / 2)
    s.add_argument("--n-t", type=int, default=128)
    s.add_argument("--n-theta", type=int, default=32)
    s.add_argument("--t-max", type=float, default=30.0)
    s.add_argument("--rhs", default="builtin:default")
    s.add_argument("--out")
    s.set_defaults(func=cmd_resolve_t)

    for name, func, helptext in (("invert-sum", cmd_invert_sum, "(L1 - A)^-1 F by the contour integral"),
                                 ("solve", cmd_solve, "full perturbed solve")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config")
        s.add_argument("--rhs", required=True, help="field CSV or builtin:<load>")
        s.add_argument("--out")
        s.add_argument("--report")
        s.add_argument("--workers", type=int)
        if name == "solve":
            s.add_argument("--field-out")
        s.set_defaults(func=func)

    s = sub.add_parser("verify", help="inequality checks")
    s.add_argument("--suite", choices=["mihlin", "kato", "bounds", "all"], default="all")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("oracle-compare", help="explicit resolvent against the finite-difference oracle")
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--omega", type=float, default=np.pi / 2)
    s.add_argument("--n", type=int, default=512)
    s.add_argument("--n-theta", type=int, default=128)
    s.add_argument("--rhs", default="bump")
    s.add_argument("--eps0", type=float, default=1.0)
    s.add_argument("--method", choices=["auto", "explicit", "direct"], default="explicit")
    s.add_argument("--tol", type=float, default=1e-3)
    s.set_defaults(func=cmd_oracle_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
