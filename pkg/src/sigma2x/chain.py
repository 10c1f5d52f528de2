"""Verification chain: each stage of the reduction checked against its neighbour.

A step compares a *computed* quantity with an *expected* one and asks the
factor probe which multiplier ``rational * pi**k`` reconciles them.  A step
passes when that multiplier is 1; a clean non-unit multiplier is recorded as
a discrepancy (the printed formulas contain several); anything else fails.

Quantities are memoised per run, so a stage shared by two steps (for
instance the r-phi double integral) is integrated once and the later step
compares against exactly the number the earlier step used.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from . import catalog
from .constants import consistency_relations, eval_closed_form, get_closed_form, get_constant
from .cubature import integrate_1d, integrate_iterated
from .errors import StepError, UnknownNameError
from .probe import Factor, FactorProbe
from .quad1d import Interval1D

SCHEMA_VERSION = "1"

PASS = "pass"
DISCREPANCY = "discrepancy"
FAIL = "fail"

DEFAULT_TOLERANCES = {"const": 1e-12, "1d": 1e-10, "2d": 1e-8, "3d": 1e-6}

PI = get_constant("PI")
_PI2 = PI * PI


@dataclass(frozen=True)
class Measured:
    """A number together with how it was obtained."""

    value: float
    error_estimate: float = 0.0
    n_evals: int = 0
    wall_ms: float = 0.0
    strategy: str = "closed_form"
    notes: tuple = ()


@dataclass(frozen=True)
class Recipe:
    expression: str
    evaluate: Callable[["_Context"], Measured]
    level: str = "const"


@dataclass(frozen=True)
class ChainStep:
    id: str
    anchor: str
    computed: Recipe
    expected: Recipe
    level: str
    group: str = ""
    tolerance: Optional[float] = None

    def tol(self, overrides=None) -> float:
        if self.tolerance is not None:
            return self.tolerance
        table = dict(DEFAULT_TOLERANCES, **(overrides or {}))
        return table[self.level]


@dataclass(frozen=True)
class StepOutcome:
    step_id: str
    anchor: str
    computed: Measured
    computed_expression: str
    expected: Measured
    expected_expression: str
    tolerance: float
    best_factor: Factor
    relative_deviation: float
    status: str
    candidates: tuple
    ambiguous: bool = False
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass(frozen=True)
class VerificationReport:
    outcomes: tuple
    verdict: str
    timestamp: str
    unstable: tuple = ()

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


# ----------------------------------------------------------------------------
# quantities


class _Context:
    """Per-run memo of integrals; engine tolerances derive from step levels."""

    def __init__(self, tolerances=None, limits=None):
        self.tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
        self.limits = limits
        self.cache = {}

    def integral(self, id, param=None, sign=None):
        key = (id, param, sign)
        if key not in self.cache:
            self.cache[key] = self._integrate(id, param, sign)
        return self.cache[key]

    def _integrate(self, id, param, sign):
        entry = catalog.get_entry(id)
        t0 = time.perf_counter()
        if sign is not None and sign < 0:
            # ln(1 - a sech r) variant; log-singular at r = 0 when a = 1
            iv = Interval1D(0.0, math.inf, transform="tanh_sinh")
            f = lambda r: catalog.f_integrand(r, param, -1)  # noqa: E731
            tol = self.tol["1d"] / 100
            res = integrate_1d(f, iv, tol, tol, rule="ts")
        elif entry.dimension == 1:
            tol = self.tol["1d"] / 100
            kw = {} if self.limits is None else {"limits": self.limits}
            res = integrate_1d(entry, None, tol, tol, param=param, rule="ts", **kw)
        else:
            rel = self.tol[f"{entry.dimension}d"] / 10
            kw = {} if self.limits is None else {"limits": self.limits}
            res = integrate_iterated(entry, rel_tol=rel, param=param, **kw)
        ms = 1000 * (time.perf_counter() - t0)
        notes = () if res.converged else (f"{id}: engine status {res.status}",)
        return Measured(res.value, res.error_estimate, res.n_evals, ms, res.strategy, notes)


def _const(value, expression):
    return Recipe(expression, lambda ctx: Measured(value))


def _scaled(id, factor=None, label=None, param=None):
    entry = catalog.get_entry(id)
    factor = entry.prefactor if factor is None else factor
    label = entry.prefactor_label if label is None else label
    level = f"{entry.dimension}d" if entry.dimension > 1 else "1d"

    def ev(ctx):
        m = ctx.integral(id, param)
        return replace(m, value=factor * m.value, error_estimate=abs(factor) * m.error_estimate)

    arg = "" if param is None else f"; {param:g}"
    text = f"{label} * I[{id}{arg}]" if label != "1" else f"I[{id}{arg}]"
    return Recipe(text, ev, level)


def _dfda_integral(a):
    """Integral of the closed-form df/da over [0, a]."""
    def ev(ctx):
        t0 = time.perf_counter()
        tol = ctx.tol["1d"] / 100
        res = integrate_1d(lambda x: catalog.eval_dfda(x), Interval1D(0.0, a, transform="tanh_sinh"),
                           tol, tol, rule="ts")
        return Measured(res.value, res.error_estimate, res.n_evals,
                        1000 * (time.perf_counter() - t0), res.strategy)
    return Recipe(f"integral of df/da over [0, {a:g}]", ev, "1d")


def _f_both_signs(a):
    """f(a) for both signs of the log argument; the closer one is reported."""
    def ev(ctx):
        target = _dfda_integral(a).evaluate(ctx).value
        plus = ctx.integral("E17_F", a, +1)
        minus = ctx.integral("E17_F", a, -1)
        dp = abs(plus.value - target)
        dm = abs(minus.value - target)
        best, sign = (plus, "+") if dp <= dm else (minus, "-")
        note = (f"sign {sign} in ln(1 {sign} a sech r) matches; "
                f"f+ = {plus.value:.17g}, f- = {minus.value:.17g}")
        return replace(best, notes=best.notes + (note,))
    return Recipe(f"f({a:g}) = I[E17_F; {a:g}] with the matching log sign", ev, "1d")


def _printed(id):
    return get_closed_form(id).printed_value


def _xdiff_printed():
    x1 = _printed("X1_EQ24")
    x2 = _printed("X2_EQ25")
    return _const(x2 - x1, "X2 - X1 (printed digits)")


def _step(id, anchor, computed, expected, level=None, group=""):
    return ChainStep(id, anchor, computed, expected, level or computed.level, group or id)


def build_chain() -> list[ChainStep]:
    """All steps in chain order."""
    G = get_constant("CATALAN")
    Z3 = get_constant("ZETA3")
    LN2 = get_constant("LN2")
    steps = [
        _step("S_23a", "Catalan integral", _scaled("E23_A"), _const(2 * G, "2 G")),
        _step("S_23b", "Catalan / zeta(3) integral", _scaled("E23_B"),
              _const(2 * PI * G - 3.5 * Z3, "2 pi G - (7/2) zeta3")),
        _step("S_T1", "tabulated r/sinh r", _scaled("T_SINH1"), _const(_PI2 / 4, "pi^2/4")),
        _step("S_T2", "tabulated r/sinh 2r", _scaled("T_SINH2"), _const(_PI2 / 16, "pi^2/16")),
    ]
    for a in (0.25, 0.5, 0.75, 1.0):
        steps.append(_step(
            f"S_inner:a={a:g}", "inner log integral after integration by parts",
            _scaled("E19_INNER", param=a),
            _const(_PI2 / 8 - math.acos(a) ** 2 / 2, f"pi^2/8 - arccos({a:g})^2/2"),
            group="S_inner"))
    for a in (0.5, 1.0):
        steps.append(_step(
            f"S_f:a={a:g}", "parametric integral f(a), f(0) = 0",
            _f_both_signs(a), _dfda_integral(a), group="S_f"))
    steps += [
        _step("S_21_22", "phi = 2 theta and fold of [pi/2, pi] (integral parts)",
              _scaled("E22_PHI", 4 * _PI2, "4 pi^2", param=4.0),
              _scaled("E21_THETA", 4 * _PI2, "4 pi^2")),
        _step("S_22", "closed form of X versus the printed X1, X2",
              _const(eval_closed_form("X_EQ22"), "pi^4 ln2 - (7/2) pi^2 zeta3"),
              _xdiff_printed()),
        _step("S_16", "single r-integral", _scaled("E16_X"), _xdiff_printed()),
        _step("S_15_14", "psi substitution in the phi-integral", _scaled("E15_X"), _scaled("E14_X")),
        _step("S_14_13", "elementary s-integration", _scaled("E14_X"), _scaled("E13_X")),
        _step("S_13_11", "arctangent splitting", _scaled("E13_X"), _scaled("E11_X")),
        _step("S_11_10", "rotation r = v + u, s = v - u", _scaled("E11_X"), _scaled("E10_X")),
        _step("S_10_9", "exponential substitution", _scaled("E10_X"), _scaled("E9_X")),
        _step("S_9_8", "fold onto the even part in x", _scaled("E9_X"), _scaled("E8_X")),
        _step("S_5_X1", "X1 triple integral", _scaled("E5_X1"),
              _const(eval_closed_form("X1_EQ24"), "-pi^4 [(4/3) ln2 - (5/pi^2) zeta3]"), "3d"),
        _step("S_5_X2", "X2 triple integral", _scaled("E5_X2"),
              _const(eval_closed_form("X2_EQ25"), "pi^4 [(2/3) ln2 - (2/pi^2) zeta3]"), "3d"),
    ]
    x1 = _printed("X1_EQ24")
    x2 = _printed("X2_EQ25")
    steps.append(_step("S_sigma", "Sigma from X1 and X2 with denominator 4 pi^2",
                       _const(-(x1 + x2) / (4 * _PI2), "-(X1 + X2)/(4 pi^2)"),
                       _const(_printed("SIGMA_EQ26"), "Sigma (printed digits)")))
    for rid, desc, computed, expected in consistency_relations():
        steps.append(_step(f"S_consts:{rid}", "constant-level relation",
                           _const(computed, desc.split(" vs ")[0]),
                           _const(expected, desc.split(" vs ")[1]), group="S_consts"))
    return steps


CHAIN = build_chain()
STEP_IDS = [s.id for s in CHAIN]
GROUPS = list(dict.fromkeys(s.group for s in CHAIN))

# steps that share a quantity with an earlier step reuse it, which makes the
# earlier step a prerequisite
_PREREQ = {
    "S_14_13": ("S_15_14",), "S_13_11": ("S_14_13",), "S_11_10": ("S_13_11",),
    "S_10_9": ("S_11_10",), "S_9_8": ("S_10_9",),
}


def resolve(selection: Iterable[str]) -> list[ChainStep]:
    """Expand group names and prerequisites; return steps in chain order."""
    selection = list(selection)
    if not selection:
        raise ValueError("empty step selection")
    wanted = set()
    for name in selection:
        hits = [s.id for s in CHAIN if s.id == name or s.group == name]
        if not hits:
            raise UnknownNameError("step id", name)
        wanted.update(hits)
    stack = list(wanted)
    while stack:
        for p in _PREREQ.get(stack.pop(), ()):
            if p not in wanted:
                wanted.add(p)
                stack.append(p)
    return [s for s in CHAIN if s.id in wanted]


def run_step(step: ChainStep, probe: FactorProbe | None = None, tolerances=None,
             context: _Context | None = None) -> StepOutcome:
    probe = probe or FactorProbe()
    ctx = context or _Context(tolerances)
    tol = step.tol(tolerances)
    try:
        comp = step.computed.evaluate(ctx)
        exp = step.expected.evaluate(ctx)
    except Exception as exc:  # attach the step id to engine failures
        raise StepError(step.id, exc) from exc
    m = probe.match(comp.value, exp.value, tol)
    notes = comp.notes + exp.notes
    if m.ambiguous:
        status = FAIL
        notes += (f"ambiguous: {len(m.matches)} candidates within tolerance; tighten it",)
    elif m.relative_deviation > tol:
        status = FAIL
    elif m.factor.is_one:
        status = PASS
    else:
        status = DISCREPANCY
    return StepOutcome(step.id, step.anchor, comp, step.computed.expression, exp,
                       step.expected.expression, tol, m.factor, m.relative_deviation, status,
                       tuple(probe.labels), m.ambiguous, notes)


def _now():
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def run_chain(selection: Iterable[str] | None = None, tolerances=None,
              probe: FactorProbe | None = None, rerun_check: bool = True,
              limits=None) -> VerificationReport:
    """Run the selected steps (all when ``selection`` is None).

    With ``rerun_check`` every discrepancy step is executed a second time on a
    fresh context; a step whose best factor changes makes the verdict fail.
    """
    steps = CHAIN if selection is None else resolve(selection)
    probe = probe or FactorProbe()
    ctx = _Context(tolerances, limits)
    outcomes = tuple(run_step(s, probe, tolerances, ctx) for s in steps)
    unstable = []
    if rerun_check:
        for s, o in zip(steps, outcomes):
            if o.status == DISCREPANCY:
                again = run_step(s, probe, tolerances, _Context(tolerances, limits))
                if again.best_factor != o.best_factor or again.status != o.status:
                    unstable.append(s.id)
    ok = all(o.status != FAIL for o in outcomes) and not unstable
    return VerificationReport(outcomes, PASS if ok else FAIL, _now(), tuple(unstable))


# ----------------------------------------------------------------------------
# serialisation


def _num(x):
    return float(f"{x:.17g}")


def report_dict(report: VerificationReport) -> dict:
    steps = []
    for o in report.outcomes:
        steps.append({
            "id": o.step_id,
            "paper_ref": o.anchor,
            "computed": {
                "expression": o.computed_expression,
                "value": _num(o.computed.value),
                "error_estimate": _num(o.computed.error_estimate),
                "n_evals": o.computed.n_evals,
                "wall_ms": round(o.computed.wall_ms, 3),
                "strategy": o.computed.strategy,
            },
            "expected": {"expression": o.expected_expression, "value": _num(o.expected.value)},
            "probe": {
                "candidates": list(o.candidates),
                "best_factor": o.best_factor.label,
                "relative_deviation": _num(o.relative_deviation),
            },
            "tolerance": o.tolerance,
            "status": o.status,
            "notes": list(o.notes),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "timestamp": report.timestamp,
        "steps": steps,
        "unstable_factors": list(report.unstable),
        "verdict": report.verdict,
    }


def format_text(report: VerificationReport) -> str:
    lines = []
    for o in report.outcomes:
        head = f"{o.status.upper():<11} {o.step_id:<22} factor {o.best_factor.label:<8}"
        lines.append(f"{head} dev {o.relative_deviation:.3e}  computed {o.computed.value:.17g}"
                     f"  expected {o.expected.value:.17g}")
        if o.status == DISCREPANCY:
            lines.append(f"  warning: {o.step_id} reconciles only with factor {o.best_factor.label}")
        for n in o.notes:
            lines.append(f"  note: {n}")
    for s in report.unstable:
        lines.append(f"  unstable factor on re-run: {s}")
    lines.append(f"verdict: {report.verdict.upper()}")
    return "\n".join(lines) + "\n"


def emit_report(report: VerificationReport, fmt: str = "text") -> str:
    """Serialise a report as ``"text"`` or ``"json"`` (schema version 1)."""
    if not report.outcomes:
        raise ValueError("cannot emit an empty report")
    if fmt == "text":
        return format_text(report)
    if fmt in ("json", "structured"):
        return json.dumps(report_dict(report), indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def list_steps() -> list[dict]:
    return [{"id": s.id, "group": s.group, "level": s.level, "anchor": s.anchor,
             "computed": s.computed.expression, "expected": s.expected.expression}
            for s in CHAIN]
