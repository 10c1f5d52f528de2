"""Mathematical constants and the closed-form targets built from them.

Constants are kept as decimal strings with well over 40 significant digits
and parsed once at import.  Closed forms are evaluated in 50-digit decimal
arithmetic and rounded once to binary64, which keeps them within an ulp or
two of the printed digit strings; plain float evaluation of the X1 form is
already 3 ulp off because of cancellation inside the bracket.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import UnknownNameError
from .probe import FactorProbe

_CTX = decimal.Context(prec=50)

# Each value agrees with mpmath to all listed digits (see tests/test_constants.py).
_SOURCES = {
    "PI": "3.14159265358979323846264338327950288419716939937510582",
    "LN2": "0.69314718055994530941723212145817656807550013436025525",
    "ZETA3": "1.20205690315959428539973816151144999076498629234049888",
    "CATALAN": "0.91596559417721901505460351493238411077414937428167213",
}


@dataclass(frozen=True)
class NamedConstant:
    name: str
    decimal_source: str
    value: float

    @property
    def exact(self) -> decimal.Decimal:
        return _CTX.create_decimal(self.decimal_source)


CONSTANTS = {
    name: NamedConstant(name, src, float(src)) for name, src in _SOURCES.items()
}


def get_constant(name: str) -> float:
    """Binary64 value of ``PI``, ``LN2``, ``ZETA3`` or ``CATALAN``."""
    try:
        return CONSTANTS[name].value
    except KeyError:
        raise UnknownNameError("constant", name) from None


def _d(name):
    return CONSTANTS[name].exact


def _x1(c):
    pi, ln2, z3 = _d("PI"), _d("LN2"), _d("ZETA3")
    pi2 = c.multiply(pi, pi)
    pi4 = c.multiply(pi2, pi2)
    bracket = c.subtract(c.multiply(c.divide(4, 3), ln2), c.divide(c.multiply(5, z3), pi2))
    return c.minus(c.multiply(pi4, bracket))


def _x2(c):
    pi, ln2, z3 = _d("PI"), _d("LN2"), _d("ZETA3")
    pi2 = c.multiply(pi, pi)
    pi4 = c.multiply(pi2, pi2)
    bracket = c.subtract(c.multiply(c.divide(2, 3), ln2), c.divide(c.multiply(2, z3), pi2))
    return c.multiply(pi4, bracket)


def _sigma(c):
    pi2 = c.multiply(_d("PI"), _d("PI"))
    pi4 = c.multiply(pi2, pi2)
    return c.divide(c.minus(c.add(_x1(c), _x2(c))), c.multiply(4, pi4))


def _e2x(c):
    pi2 = c.multiply(_d("PI"), _d("PI"))
    return c.subtract(
        c.divide(_d("LN2"), 6), c.divide(c.multiply(3, _d("ZETA3")), c.multiply(4, pi2))
    )


def _x22(c):
    pi2 = c.multiply(_d("PI"), _d("PI"))
    pi4 = c.multiply(pi2, pi2)
    return c.subtract(
        c.multiply(pi4, _d("LN2")), c.multiply(c.multiply(decimal.Decimal("3.5"), pi2), _d("ZETA3"))
    )


def _sum7(c):
    pi2 = c.multiply(_d("PI"), _d("PI"))
    return c.subtract(
        c.multiply(3, _d("ZETA3")), c.multiply(c.divide(c.multiply(2, pi2), 3), _d("LN2"))
    )


@dataclass(frozen=True)
class ClosedForm:
    id: str
    expression: str
    paper_digits: Optional[str]
    _evaluate: Callable[[decimal.Context], decimal.Decimal]

    @property
    def value(self) -> float:
        return float(self._evaluate(_CTX))

    @property
    def printed_value(self) -> Optional[float]:
        return None if self.paper_digits is None else float(self.paper_digits)

    def matching_digits(self) -> Optional[int]:
        """Number of leading significant digits shared with the printed string."""
        if self.paper_digits is None:
            return None
        return matching_digits(self._evaluate(_CTX), decimal.Decimal(self.paper_digits))


def matching_digits(a, b) -> int:
    a, b = decimal.Decimal(a), decimal.Decimal(b)
    if a == b:
        return 50
    if b == 0:
        return 0
    rel = abs((a - b) / b)
    return max(0, int(-rel.log10()))


CLOSED_FORMS = {
    cf.id: cf
    for cf in (
        ClosedForm("E2X_EQ2", "(1/6) ln2 - (3/(4 pi^2)) zeta3", None, _e2x),
        ClosedForm("X_EQ22", "pi^4 ln2 - (7/2) pi^2 zeta3", None, _x22),
        ClosedForm(
            "X1_EQ24",
            "-pi^4 [(4/3) ln2 - (5/pi^2) zeta3]",
            "-30.70598523924889925762268444608481536875855208165945918981645846",
            _x1,
        ),
        ClosedForm(
            "X2_EQ25",
            "pi^4 [(2/3) ln2 - (2/pi^2) zeta3]",
            "21.284905670516337983402598547497784400625730440810132220995696061",
            _x2,
        ),
        ClosedForm(
            "SIGMA_EQ26",
            "-(X1 + X2) / (4 pi^4)",
            "0.0241791589181444058954507621628984314049152384251207335945309986",
            _sigma,
        ),
        ClosedForm("SUM_EQ7", "3 zeta3 - (2 pi^2/3) ln2", None, _sum7),
    )
}


def get_closed_form(id: str) -> ClosedForm:
    try:
        return CLOSED_FORMS[id]
    except KeyError:
        raise UnknownNameError("closed form", id) from None


def eval_closed_form(id: str) -> float:
    return get_closed_form(id).value


@dataclass(frozen=True)
class AuditEntry:
    relation: str
    description: str
    computed: float
    expected: float
    deviation: float
    best_factor: object
    deviation_after_factor: float

    def __iter__(self):
        # unpacks as (relation id, deviation, best probe factor)
        return iter((self.relation, self.deviation, self.best_factor))


def _printed(id):
    return CLOSED_FORMS[id].printed_value


def consistency_relations():
    """(id, description, computed, expected) for the constant-level relations.

    The printed digit strings of X1, X2 and Sigma are the anchors.
    """
    pi = get_constant("PI")
    x1, x2, sigma = _printed("X1_EQ24"), _printed("X2_EQ25"), _printed("SIGMA_EQ26")
    return [
        ("SUM_EQ7", "X1 + X2 vs 3 zeta3 - (2 pi^2/3) ln2", x1 + x2, eval_closed_form("SUM_EQ7")),
        ("SIGMA_DENOM", "-(X1 + X2)/(4 pi^2) vs Sigma", -(x1 + x2) / (4 * pi**2), sigma),
        ("X_DIFF", "pi^4 ln2 - (7/2) pi^2 zeta3 vs X2 - X1", eval_closed_form("X_EQ22"), x2 - x1),
    ]


def consistency_audit(probe: FactorProbe | None = None, tol: float = 1e-12) -> list[AuditEntry]:
    """Check the printed constant-level relations and find the reconciling factor."""
    probe = probe or FactorProbe()
    out = []
    for rid, desc, computed, expected in consistency_relations():
        m = probe.match(computed, expected, tol)
        dev = abs(computed - expected) / abs(expected)
        out.append(AuditEntry(rid, desc, computed, expected, dev, m.factor, m.relative_deviation))
    return out
