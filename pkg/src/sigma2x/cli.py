"""Command-line front end.

Exit codes: 0 success, 1 verification verdict fail, 2 integration did not
converge, 3 unknown identifier or bad usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

from . import catalog
from .chain import emit_report, list_steps, run_chain
from .constants import CLOSED_FORMS, CONSTANTS, consistency_audit
from .cubature import (CUBATURE_LIMITS, integrate_1d, integrate_adaptive_nd, integrate_iterated,
                       integrate_mc)
from .errors import DomainError, IntegrandEvaluationError, StepError, UnknownNameError
from .quad1d import Interval1D, Limits

EXIT_OK, EXIT_FAIL, EXIT_NOCONV, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def g17(x) -> str:
    return f"{x:.17g}"


# ----------------------------------------------------------------------------
# list


def cmd_list(args) -> int:
    rows = [dict(kind="integrand", **e) for e in catalog.list_entries()]
    rows += [dict(kind="function", **f) for f in catalog.list_functions()]
    rows += [dict(kind="step", **s) for s in list_steps()]
    if args.filter:
        rows = [r for r in rows if args.filter in r["id"]]
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    for r in rows:
        if r["kind"] == "step":
            print(f"step       {r['id']:<22} {r['level']:<5} {r['computed']}  vs  {r['expected']}")
        else:
            dom = "; ".join(r.get("domain", ["a in [0, 1]"]))
            print(f"{r['kind']:<10} {r['id']:<22} {r['dimension']}D  {dom}  -- {r['anchor']}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# compute


def _tolerances(args, dim):
    if args.tol is None and args.rel_tol is None:
        return (1e-12, 1e-12) if dim == 1 else (0.0, {2: 1e-9, 3: 1e-7}[dim])
    return (args.tol or 0.0, args.rel_tol or 0.0)


def _integrate(entry, args, param, limits):
    dim = entry.dimension
    abs_tol, rel_tol = _tolerances(args, dim)
    method = args.method or ("ts" if dim == 1 else "iterated")
    if method == "mc":
        if args.seed is None:
            raise UsageError("--method mc requires --seed")
        return integrate_mc(entry, n_samples=args.mc_samples, seed=args.seed, limits=limits,
                            param=param)
    if dim == 1:
        if method not in ("gk", "ts"):
            raise UsageError(f"method {method!r} does not apply to a one-dimensional integrand")
        return integrate_1d(entry, None, abs_tol, rel_tol, limits, param=param, rule=method)
    if method in ("iterated", "gk"):
        return integrate_iterated(entry, abs_tol=abs_tol, rel_tol=rel_tol, limits=limits,
                                  param=param)
    if method == "adaptive":
        return integrate_adaptive_nd(entry, abs_tol=abs_tol, rel_tol=rel_tol, limits=limits,
                                     param=param)
    raise UsageError(f"method {method!r} does not apply to a {dim}-dimensional integrand")


def cmd_compute(args) -> int:
    limits = Limits(max_evals=args.max_evals or CUBATURE_LIMITS.max_evals,
                    workers=max(1, args.threads))
    t0 = time.perf_counter()
    if args.id in catalog.FUNCTIONS:
        # integrate the pointwise df/da from 0 to a
        a = 1.0 if args.param is None else args.param
        if not 0.0 < a <= 1.0:
            raise UsageError("--param for E20_DFDA must lie in (0, 1]")
        abs_tol, rel_tol = _tolerances(args, 1)
        res = integrate_1d(catalog.eval_dfda, Interval1D(0.0, a, transform="tanh_sinh"),
                           abs_tol, rel_tol, limits, rule="ts")
        prefactor, offset, label = 1.0, 0.0, "1"
        print(f"id              {args.id} integrated over [0, {g17(a)}]")
    else:
        entry = catalog.get_entry(args.id)
        res = _integrate(entry, args, args.param, limits)
        prefactor, offset, label = entry.prefactor, entry.offset, entry.prefactor_label
        if entry.offset_label:
            label = f"{entry.offset_label} + {label} *"
        print(f"id              {args.id}")
    ms = 1000 * (time.perf_counter() - t0)
    print(f"integral        {g17(res.value)}")
    print(f"error_estimate  {g17(res.error_estimate)}")
    print(f"prefactor       {label}")
    print(f"scaled_value    {g17(offset + prefactor * res.value)}")
    print(f"scaled_error    {g17(abs(prefactor) * res.error_estimate)}")
    print(f"strategy        {res.strategy}")
    print(f"n_evals         {res.n_evals}")
    print(f"wall_ms         {ms:.1f}")
    if res.std_error is not None:
        print(f"seed            {res.seed}")
        print(f"std_error       {g17(res.std_error)}")
        print(f"rejected        {res.rejected}")
    print(f"status          {res.status}")
    return EXIT_OK if res.converged else EXIT_NOCONV


# ----------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    if args.all:
        selection = None
    else:
        selection = [s for s in args.steps.split(",") if s]
        if not selection:
            raise UsageError("empty step selection")
    report = run_chain(selection, rerun_check=not args.no_rerun)
    text = emit_report(report, "text")
    sys.stdout.write(text)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(emit_report(report, "json"))
    if args.text:
        with open(args.text, "w") as fh:
            fh.write(text)
    return EXIT_OK if report.passed else EXIT_FAIL


# ----------------------------------------------------------------------------
# constants


def cmd_constants(args) -> int:
    rows = []
    for c in CONSTANTS.values():
        rows.append({"name": c.name, "value": c.value, "source": c.decimal_source})
    for cf in CLOSED_FORMS.values():
        rows.append({"name": cf.id, "value": cf.value, "expression": cf.expression,
                     "printed_digits_matched": cf.matching_digits()})
    audit = consistency_audit()
    if args.json:
        doc = {"constants": rows, "relations": [
            {"relation": a.relation, "description": a.description, "deviation": a.deviation,
             "best_factor": a.best_factor.label,
             "deviation_after_factor": a.deviation_after_factor} for a in audit]}
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    for r in rows:
        line = f"{r['name']:<11} {g17(r['value']):>24}"
        if r.get("expression"):
            line += f"   {r['expression']}"
        if r.get("printed_digits_matched") is not None:
            line += f"   (matches printed digits: {r['printed_digits_matched']})"
        print(line)
    print()
    for a in audit:
        print(f"{a.relation:<12} factor {a.best_factor.label:<6} deviation {a.deviation:.3e}"
              f" -> {a.deviation_after_factor:.3e}   {a.description}")
    return EXIT_OK


# ----------------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sigma2x", description="Quadrature checks of the exchange self-energy chain.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("list", help="list integrands and verification steps")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--filter", default=None, help="keep rows whose id contains this text")
    sp.set_defaults(func=cmd_list)

    sp = sub.add_parser("compute", help="integrate one catalog entry")
    sp.add_argument("id")
    sp.add_argument("--tol", type=float, default=None, help="absolute tolerance")
    sp.add_argument("--rel-tol", type=float, default=None, help="relative tolerance")
    sp.add_argument("--method", choices=("gk", "ts", "iterated", "adaptive", "mc"), default=None)
    sp.add_argument("--mc-samples", type=_positive_int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--max-evals", type=_positive_int, default=None)
    sp.add_argument("--threads", type=_positive_int, default=1)
    sp.add_argument("--param", type=float, default=None, help="parameter of parametric entries")
    sp.set_defaults(func=cmd_compute)

    sp = sub.add_parser("verify", help="run verification steps")
    sel = sp.add_mutually_exclusive_group(required=True)
    sel.add_argument("--steps", help="comma-separated step ids or groups")
    sel.add_argument("--all", action="store_true")
    out = sp.add_mutually_exclusive_group()
    out.add_argument("--json", metavar="PATH", help="write the structured report here")
    out.add_argument("--text", metavar="PATH", help="write the text report here")
    sp.add_argument("--no-rerun", action="store_true", help="skip the factor stability re-run")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("constants", help="print constants, closed forms and relations")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_constants)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnknownNameError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrandEvaluationError, StepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
