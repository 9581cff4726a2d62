"""Command-line interface.

Every command prints one report (JSON by default) with the keys ``inputs``,
``results``, ``diagnostics`` and ``version``.  Input values are echoed as the
raw strings given on the command line.  Exit codes: 0 success, 2 invalid
input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings

from . import __version__
from .calculus import (
    IntegrationConfig,
    hahn_derivative,
    jackson_series,
    polynomial,
    qomega_exp_detail,
)
from .errors import FixedPointInput, NumericalError
from .leitmann import (
    probe_family,
    verify_constant_difference,
    verify_control_invariance,
    verify_gauge_identity,
)
from .models import (
    FIXTURES,
    UTILITIES,
    ControlFixture,
    RamseyConfig,
    builtin,
    example4_gauge,
    fixture,
    ramsey_consumption,
    ramsey_el_residual,
)
from .qcore import QOmegaParams, build_lattice, resolvable_depth
from .variational import el_residual, evaluate_functional, solve_direct

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

# deepest lattice level used for pointwise checks: jumps of at least this size
SECOND_ORDER_GAP = 3e-3
FIRST_ORDER_GAP = 1e-5

COMMANDS = ("deriv", "integral", "exp", "el-check", "solve", "leitmann-check", "ramsey", "fixtures")


class InputError(ValueError):
    pass


def _float(args, name, required=True, default=None):
    raw = getattr(args, name, None)
    if raw is None:
        if required:
            raise InputError(f"--{name.replace('_', '-')} is required")
        return default
    try:
        return float(raw)
    except ValueError:
        raise InputError(f"--{name} expects a number, got {raw!r}") from None


def _int(args, name, default=None):
    raw = getattr(args, name, None)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"--{name} expects an integer, got {raw!r}") from None


def _params(args, defaults=None):
    if defaults is not None:
        q = _float(args, "q", False, defaults.q)
        omega = _float(args, "omega", False, defaults.omega)
    else:
        q = _float(args, "q")
        omega = _float(args, "omega")
    try:
        return QOmegaParams(q, omega)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _config(args):
    cfg = IntegrationConfig()
    tol = _float(args, "tol", False, cfg.rel_tol)
    max_terms = _int(args, "max_terms", cfg.max_terms)
    return IntegrationConfig(rel_tol=tol, abs_tol=cfg.abs_tol, max_terms=max_terms)


def _function(args, required=True):
    if args.poly is not None and args.builtin is not None:
        raise InputError("give either --poly or --builtin, not both")
    if args.poly is not None:
        try:
            coeffs = [float(c) for c in args.poly.split(",")]
        except ValueError:
            raise InputError(f"--poly expects comma-separated numbers, got {args.poly!r}") from None
        return polynomial(coeffs)
    if args.builtin is not None:
        return builtin(args.builtin)
    if required:
        raise InputError("a function is required (--poly or --builtin)")
    return None


class _Report:
    def __init__(self, args):
        self.inputs = {
            k: v for k, v in vars(args).items() if v is not None and k not in ("format",)
        }
        self.results = {}
        self.rows = None
        self.diagnostics = {"truncation_index": None, "tail_estimate": None, "warnings": []}

    def as_dict(self):
        return {
            "inputs": self.inputs,
            "results": self.results,
            "diagnostics": self.diagnostics,
            "version": __version__,
        }


# ---------------------------------------------------------------------------
# commands


def _cmd_deriv(args, rep):
    params = _params(args)
    f = _function(args)
    t = _float(args, "t")
    rep.results["value"] = hahn_derivative(params, f, t)


def _cmd_integral(args, rep):
    params = _params(args)
    f = _function(args)
    a, b = _float(args, "a"), _float(args, "b")
    cfg = _config(args)
    sb = jackson_series(params, f, b, cfg)
    sa = jackson_series(params, f, a, cfg)
    rep.results["value"] = sb.value - sa.value
    rep.diagnostics["truncation_index"] = max(sa.terms, sb.terms)
    rep.diagnostics["tail_estimate"] = sa.tail_estimate + sb.tail_estimate


def _cmd_exp(args, rep):
    params = _params(args)
    z, t = _float(args, "z"), _float(args, "t")
    res = qomega_exp_detail(params, z, t, _config(args))
    rep.results["value"] = res.value
    rep.results["zero_factor"] = res.zero_factor
    rep.diagnostics["truncation_index"] = res.factors
    if res.zero_factor:
        rep.diagnostics["warnings"].append("a factor of the product vanishes")


def _load_fixture(args, name):
    if name is None:
        raise InputError("--fixture/--name is required")
    base = fixture(name)
    defaults = base.params if isinstance(base, ControlFixture) else base.problem.params
    params = _params(args, defaults)
    overrides = {"q": params.q, "omega": params.omega}
    if not isinstance(base, ControlFixture):
        for key in ("a", "b", "alpha", "beta"):
            val = _float(args, key, False)
            if val is not None:
                overrides[key] = val
    return fixture(name, **overrides)


def _check_depth(args, params, a, b, gap):
    depth = _int(args, "depth")
    if depth is None:
        depth = max(1, resolvable_depth(params, a, b, gap))
    if depth < 1:
        raise InputError("--depth must be >= 1")
    return depth


def _el_check(args, fx, out):
    pr = fx.problem
    depth = _check_depth(args, pr.params, pr.a, pr.b, SECOND_ORDER_GAP)
    lattice = build_lattice(pr.params, pr.a, pr.b, depth)
    res = [abs(el_residual(pr, fx.solution, t)) for t in lattice.points]
    out["el_max_residual"] = max(res)
    out["el_depth"] = depth
    out["el_points"] = len(res)


def _solve_check(args, fx, out, rep):
    pr = fx.problem
    depth = _int(args, "depth", 40)
    traj = solve_direct(pr, depth)
    err = max(abs(traj.values[p] - fx.solution(p)) for p in traj.lattice.points)
    out["solve_value"] = traj.info["value"]
    out["solve_iterations"] = traj.info["iterations"]
    out["solve_grad_norm"] = traj.info["grad_norm"]
    out["solve_max_error"] = err
    out["analytic_value"] = evaluate_functional(pr, fx.solution, _config(args))
    rep.rows = [(p, traj.values[p]) for p in traj.lattice.points]


def _leitmann_check(args, fx, out):
    cfg = _config(args)
    if isinstance(fx, ControlFixture):
        s = _float(args, "s", False, 0.3)
        r = verify_control_invariance(fx.params, s, fx.optimum, cfg, _int(args, "depth"))
        out.update(
            shift_error=r.shift_error,
            covariance_error=r.covariance_error,
            null_value=r.null_value,
            optimum_value=r.optimum_value,
            minimum=fx.expected_minimum,
            passed=r.passed(),
        )
        return
    pr = fx.problem
    params = pr.params
    depth = _check_depth(args, params, pr.a, pr.b, FIRST_ORDER_GAP)
    lattice = build_lattice(params, pr.a, pr.b, depth)
    pts = [t for t in lattice.points if not params.is_fixed_point(t)]
    if fx.name == "example4":
        A, B = fx.expected["A"], fx.expected["C"]
        transform, gauge = example4_gauge(fx, A, B)
        L = pr.lagrangian
        ybar = polynomial([0.0])
        gauge_err = max(abs(verify_gauge_identity(params, L, L, transform, gauge, ybar, t)) for t in pts)
        out["gauge_max_error"] = gauge_err
        return
    if fx.leitmann is None:
        raise InputError(f"fixture {fx.name!r} has no Leitmann data")
    fbar, transform, gauge, ybar = fx.leitmann
    L = pr.lagrangian
    out["gauge_max_error"] = max(
        abs(verify_gauge_identity(params, L, fbar, transform, gauge, ybar, t)) for t in pts
    )
    samples = probe_family(fx.solution, pr.a, pr.b)
    r = verify_constant_difference(params, L, fbar, transform, samples, pr.a, pr.b, cfg)
    out["constant_spread"] = r.spread
    out["constant"] = r.constant
    out["argmin_agrees"] = r.argmin_agrees


def _run_checks(args, name, check, rep):
    fx = _load_fixture(args, name)
    out = {"fixture": name}
    control = isinstance(fx, ControlFixture)
    wanted = ("el", "solve", "leitmann") if check == "all" else (check,)
    for c in wanted:
        if c == "el" and not control:
            _el_check(args, fx, out)
        elif c == "solve" and not control:
            _solve_check(args, fx, out, rep)
        elif c == "leitmann" and (control or fx.leitmann is not None or fx.name == "example4"):
            _leitmann_check(args, fx, out)
        elif check != "all":
            raise InputError(f"check {c!r} does not apply to fixture {name!r}")
    rep.results.update(out)


def _cmd_el_check(args, rep):
    _run_checks(args, args.fixture, "el", rep)


def _cmd_solve(args, rep):
    _run_checks(args, args.fixture, "solve", rep)


def _cmd_leitmann_check(args, rep):
    _run_checks(args, args.fixture, "leitmann", rep)


def _cmd_fixtures(args, rep):
    name = args.name or args.fixture
    if name is None:
        rep.results["fixtures"] = sorted(FIXTURES)
        return
    _run_checks(args, name, args.check or "all", rep)


def _cmd_ramsey(args, rep):
    params = _params(args)
    W = _function(args)
    util = args.utility or "quadratic"
    if util not in UTILITIES:
        raise InputError(f"--utility must be one of {sorted(UTILITIES)}")
    config = RamseyConfig(
        _float(args, "p"),
        _float(args, "r"),
        _float(args, "T"),
        UTILITIES[util](),
        params,
        depth=_int(args, "depth", 30),
        integration=_config(args),
    )
    t = _float(args, "t")
    rep.results["consumption"] = ramsey_consumption(config, W, t)
    rep.results["el_residual"] = ramsey_el_residual(config, W, t)


HANDLERS = {
    "deriv": _cmd_deriv,
    "integral": _cmd_integral,
    "exp": _cmd_exp,
    "el-check": _cmd_el_check,
    "solve": _cmd_solve,
    "leitmann-check": _cmd_leitmann_check,
    "ramsey": _cmd_ramsey,
    "fixtures": _cmd_fixtures,
}


# ---------------------------------------------------------------------------
# parser and output


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hahnvar", description="Hahn quantum calculus and variational checks."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    # values are kept as raw strings so the report can echo them verbatim
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q")
    common.add_argument("--omega")
    common.add_argument("--tol", help="relative tolerance of series and products")
    common.add_argument("--max-terms", dest="max_terms")
    common.add_argument("--depth", help="lattice depth")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    func = argparse.ArgumentParser(add_help=False)
    func.add_argument("--poly", help='polynomial coefficients "c0,c1,..."')
    func.add_argument("--builtin", help="named function: piecewise, one_plus_half_t2")

    fix = argparse.ArgumentParser(add_help=False)
    fix.add_argument("--fixture", choices=sorted(FIXTURES))
    for name in ("a", "b", "alpha", "beta", "s"):
        fix.add_argument(f"--{name}")

    p = sub.add_parser("deriv", parents=[common, func], help="Hahn derivative at a point")
    p.add_argument("--t")
    p = sub.add_parser("integral", parents=[common, func], help="Jackson-Norlund integral")
    p.add_argument("--a")
    p.add_argument("--b")
    p = sub.add_parser("exp", parents=[common], help="q,omega-exponential E(z, t)")
    p.add_argument("--z")
    p.add_argument("--t")
    sub.add_parser("el-check", parents=[common, fix], help="EL residual of a fixture solution")
    sub.add_parser("solve", parents=[common, fix], help="direct minimization on a fixture")
    sub.add_parser("leitmann-check", parents=[common, fix], help="gauge identity checks")
    p = sub.add_parser("ramsey", parents=[common, func], help="quantum Ramsey consumption and EL")
    for name in ("p", "r", "T", "t"):
        p.add_argument(f"--{name}")
    p.add_argument("--utility", help="log or quadratic")
    p = sub.add_parser("fixtures", parents=[common, fix], help="list or check fixtures")
    p.add_argument("--name", choices=sorted(FIXTURES))
    p.add_argument("--check", choices=("el", "solve", "leitmann", "all"))
    return parser


def _render(rep: _Report, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if rep.rows is not None:
            writer.writerow(["point", "value"])
            writer.writerows((repr(p), repr(v)) for p, v in rep.rows)
        else:
            writer.writerow(["key", "value"])
            for k, v in sorted(rep.results.items()):
                writer.writerow([k, repr(v) if isinstance(v, float) else v])
        return buf.getvalue()
    data = rep.as_dict()
    if rep.rows is not None:
        data["results"]["lattice"] = [[p, v] for p, v in rep.rows]
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def run(argv=None, stdout=None) -> int:
    """Parse ``argv``, run one command and write its report; returns the exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    rep = _Report(args)
    code = EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            HANDLERS[args.command](args, rep)
        except NumericalError as exc:
            rep.results["error"] = {"type": type(exc).__name__, "message": str(exc)}
            code = EXIT_NUMERIC
        except (ValueError, FixedPointInput) as exc:
            rep.results["error"] = {"type": type(exc).__name__, "message": str(exc)}
            code = EXIT_INPUT
    rep.diagnostics["warnings"].extend(str(w.message) for w in caught)
    stdout.write(_render(rep, args.format))
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
