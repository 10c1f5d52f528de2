"""Registry of the integrands along the reduction of X = X2 - X1.

Every entry stores the bare integrand (what sits under the integral signs),
its axes in the order used for iterated integration, and the printed
prefactor separately, so that ``offset + prefactor * integral`` is the value
the printed formula assigns to that stage.

Kernels are written against ``(coords, lo_gaps, hi_gaps, param)``.  The gaps
are the distances of each coordinate from the lower and upper end of its
axis; the integration maps produce them without cancellation, which matters
because the kernels vanish or blow up at ``x -> 1``, ``pq -> 1`` and
``phi -> pi/2`` at rates that a plain ``1 - x`` cannot resolve.

Two-dimensional entries with r-dependent limits are rectangularised: the
symmetric s-range of the rotated forms uses ``s = r t`` with ``t in [-1, 1]``
(Jacobian ``r`` included), and the psi-range above ``mu(r)`` uses
``psi = mu + (pi/2 - mu) w`` with ``w in [0, 1]`` (Jacobian included).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cubature import BoxDomain
from .errors import DomainError, IntegrandEvaluationError, UnknownNameError
from .quad1d import Interval1D

PI = math.pi
HALF_PI = 0.5 * math.pi

# beyond this r every integrand in the catalog is below 1e-300
_R_CUT = 300.0


# ----------------------------------------------------------------------------
# kernel F[p, q, x]


@dataclass(frozen=True)
class FKernelParams:
    """Derived parameters of the arctangent kernel for ``p, q in (0, 1)``."""

    p: float
    q: float

    def __post_init__(self):
        if not (0.0 < self.p < 1.0 and 0.0 < self.q < 1.0):
            raise DomainError(f"p, q must lie in (0, 1), got p={self.p}, q={self.q}")

    @property
    def alpha(self) -> float:
        return (1 - self.q**2) / (2 * self.q)

    @property
    def beta(self) -> float:
        return (1 - self.p**2) / (2 * self.p)

    @property
    def a(self) -> float:
        return (1 + self.p**2 * self.q**2) / (2 * self.p * self.q)


def _kernel_terms(p, q, x, dp, dq, xm, xp):
    """alpha, beta, 1-x^2, 1-p^2q^2 and a^2-x^2 from coordinates and gaps.

    ``dp = 1-p``, ``dq = 1-q``, ``xm = 1-x``, ``xp = 1+x``.
    """
    alpha = dq * (2 - dq) / (2 * q)
    beta = dp * (2 - dp) / (2 * p)
    one_m_x2 = xm * xp
    one_m_pq = dp + dq - dp * dq
    one_m_p2q2 = one_m_pq * (1 + p * q)
    a2m1 = (one_m_p2q2 / (2 * p * q)) ** 2
    return alpha, beta, one_m_x2, one_m_p2q2, a2m1 + one_m_x2


def _F(p, q, x, dp, dq, xm, xp):
    alpha, beta, one_m_x2, one_m_p2q2, a2mx2 = _kernel_terms(p, q, x, dp, dq, xm, xp)
    arg = (alpha * x + beta) / np.sqrt((1 + alpha * alpha) * one_m_x2)
    return 2.0 / a2mx2 * np.arctan(arg), one_m_p2q2


def eval_F(p, q, x):
    """``(2/(a^2-x^2)) * arctan[(alpha x + beta)/sqrt((1+alpha^2)(1-x^2))]``."""
    p, q, x = (np.asarray(v, dtype=float) for v in (p, q, x))
    if np.any((p <= 0) | (p >= 1) | (q <= 0) | (q >= 1)):
        raise DomainError("p and q must lie in the open interval (0, 1)")
    if np.any((x <= -1) | (x >= 1)):
        raise DomainError("x must lie in the open interval (-1, 1)")
    val, _ = _F(p, q, x, 1 - p, 1 - q, 1 - x, 1 + x)
    return val[()] if val.ndim == 0 else val


def fold_F(p, q, x):
    """``F(p,q,x) + F(p,q,-x)`` via a single two-argument arctangent.

    The even part of the kernel; the second argument of the arctangent
    changes sign on the domain, so the one-argument form would be wrong.
    """
    p, q, x = (np.asarray(v, dtype=float) for v in (p, q, x))
    alpha, beta, one_m_x2, _, a2mx2 = _kernel_terms(p, q, x, 1 - p, 1 - q, 1 - x, 1 + x)
    num = 2 * beta * np.sqrt((1 + alpha**2) * one_m_x2)
    den = alpha**2 - beta**2 + one_m_x2
    return 2.0 / a2mx2 * np.arctan2(num, den)


# ----------------------------------------------------------------------------
# kernels: signature (x, lo, hi, param) with tuples of coordinate arrays


def _e5_x1(x, lo, hi, param):
    p, q, xx = x
    F, d = _F(p, q, xx, hi[0], hi[1], hi[2], lo[2])
    return F / (d * (1 + q * q))


def _e5_x2(x, lo, hi, param):
    p, q, xx = x
    F, d = _F(p, q, xx, hi[0], hi[1], hi[2], lo[2])
    return q * q * F / (d * (1 + q * q))


def _e8(x, lo, hi, param):
    q, p, xx = x
    F, d = _F(p, q, xx, hi[1], hi[0], hi[2], lo[2])
    return F / d


def _e9(x, lo, hi, param):
    p, q, xx = x
    alpha, beta, one_m_x2, one_m_p2q2, a2mx2 = _kernel_terms(
        p, q, xx, hi[0], hi[1], hi[2], 1 + xx)
    num = 2 * beta * np.sqrt((1 + alpha * alpha) * one_m_x2)
    den = alpha * alpha - beta * beta + one_m_x2
    return np.arctan2(num, den) / (one_m_p2q2 * a2mx2)


def _cos_from_gap(phi, hi_gap):
    # cos(phi) for phi in [0, pi/2], accurate near pi/2
    return np.where(phi > 0.25 * PI, np.sin(hi_gap), np.cos(phi))


def _e10(x, lo, hi, param):
    u, v, phi = x
    c = _cos_from_gap(phi, hi[2])
    R = u + v
    with np.errstate(over="ignore", invalid="ignore"):
        shR = np.sinh(R)
        num = 2 * np.sinh(v) * np.cosh(u) * c
        den = shR * np.sinh(u - v) + c * c
        val = c * np.arctan2(num, den) / (shR * (shR * shR + c * c))
    return np.where(R > _R_CUT, 0.0, val)


def _e11(x, lo, hi, param):
    r, t, phi = x
    c = _cos_from_gap(phi, hi[2])
    s = r * t
    with np.errstate(over="ignore", invalid="ignore"):
        shr = np.sinh(r)
        # sinh r + sinh s without cancellation near s = -r
        ssum = 2 * np.sinh(0.5 * r * lo[1]) * np.cosh(0.5 * r * hi[1])
        val = r * c * np.arctan2(ssum * c, c * c - shr * np.sinh(s)) / (shr * (shr * shr + c * c))
    return np.where(r > _R_CUT, 0.0, val)


def _e13(x, lo, hi, param):
    r, t, phi = x
    c = _cos_from_gap(phi, hi[2])
    s = r * t
    with np.errstate(over="ignore", invalid="ignore"):
        shr = np.sinh(r)
        val = r * c * (np.arctan(shr / c) + np.arctan(np.sinh(s) / c)) / (shr * (c * c + shr * shr))
    return np.where(r > _R_CUT, 0.0, val)


def _e14(x, lo, hi, param):
    r, phi = x
    c = _cos_from_gap(phi, hi[1])
    with np.errstate(over="ignore", invalid="ignore"):
        shr = np.sinh(r)
        val = r / shr * np.arctan(shr / c) * c / (c * c + shr * shr)
    return np.where(r > _R_CUT, 0.0, val)


def _e15(x, lo, hi, param):
    r, w = x
    with np.errstate(over="ignore", invalid="ignore"):
        shr = np.sinh(r)
        mu = np.arctan(shr)
        nu = np.arctan(1.0 / shr)  # pi/2 - mu
        psi = mu + nu * w
        cos_psi = np.sin(nu * hi[1])
        sin_mu = np.tanh(r)
        sin_psi = np.sin(psi)
        # sin psi - sin mu = 2 cos((psi+mu)/2) sin((psi-mu)/2)
        diff = 2 * np.sin(nu * (1 - 0.5 * w)) * np.sin(0.5 * nu * lo[1])
        root = np.sqrt(diff * (sin_psi + sin_mu))
        val = r / shr / np.cosh(r) * psi * cos_psi / root * nu
    return np.where(r > _R_CUT, 0.0, val)


def _e16(x, lo, hi, param):
    (r,) = x
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(r)
        return r * sech * np.log1p(sech) / np.sinh(r)


def f_integrand(r, a, sign=1):
    """Integrand of f(a) with log argument ``1 + sign * a * sech r``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore"):
        ch = np.cosh(r)
        if sign > 0:
            log = np.log1p(a / ch)
        else:
            ratio = a / ch
            # near r = 0 with a near 1 use 1 - a sech r = (2 sinh^2(r/2) + 1 - a) / cosh r
            sh = np.sinh(0.5 * np.minimum(r, 2.0))
            q = 2 * sh * sh + (1 - a)
            tiny = q < 1e-300
            log_q = np.where(tiny, 2 * np.log(np.where(tiny, sh, 1.0)) + math.log(2),
                             np.log(np.where(tiny, 1.0, q)))
            near = log_q - np.log(np.where(ratio > 0.5, ch, 1.0))
            log = np.where(ratio > 0.5, near, np.log1p(-np.minimum(ratio, 0.5)))
        val = r * log / (np.sinh(r) * ch)
    return np.where(r > _R_CUT, 0.0, val)


def _e17(x, lo, hi, param):
    return f_integrand(x[0], param, +1)


def _e19(x, lo, hi, param):
    (r,) = x
    with np.errstate(over="ignore"):
        return np.log1p(param / np.cosh(r))


def _e21(x, lo, hi, param):
    (theta,) = x
    d = hi[0]  # pi/2 - theta
    near0 = (theta * theta - 0.25 * PI * PI * np.sin(theta) ** 2) / np.sin(2 * theta)
    near_half = (-PI * d + d * d + 0.25 * PI * PI * np.sin(d) ** 2) / np.sin(2 * d)
    return np.where(theta <= 0.25 * PI, near0, near_half)


def _e22(x, lo, hi, param):
    (phi,) = x
    return param * phi * (phi - PI) / np.sin(phi)


def _e23a(x, lo, hi, param):
    (phi,) = x
    return phi / np.sin(phi)


def _e23b(x, lo, hi, param):
    (phi,) = x
    return phi * phi / np.sin(phi)


def _t_sinh1(x, lo, hi, param):
    (r,) = x
    with np.errstate(over="ignore"):
        return r / np.sinh(r)


def _t_sinh2(x, lo, hi, param):
    (r,) = x
    with np.errstate(over="ignore"):
        return r / np.sinh(2 * r)


# ----------------------------------------------------------------------------
# df/da


def eval_dfda(a):
    """Closed-form derivative of f(a) on ``(0, 1)``; removable limits at the ends.

    The two poles at ``a = 0`` cancel analytically; below ``a = 1/2`` the
    expression is rearranged so that the cancellation never happens in
    floating point.
    """
    a = np.asarray(a, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise DomainError("df/da is defined for a in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        asin = np.arcsin(a)
        ratio = np.where(a > 0, asin / np.where(a > 0, a, 1.0), 1.0)
        small = (2 * PI**2 - PI**2 * a - 4 * PI * ratio + 4 * asin * ratio) / (8 * (1 - a * a))
        acos = np.arccos(a)
        large = (-PI**2 / (8 * a) * (1 - a) / (1 + a)
                 + acos * acos / (2 * a * (1 - a) * (1 + a)))
        out = np.where(a < 0.5, small, large)
        out = np.where(a == 1.0, 0.5, out)
    return out[()] if out.ndim == 0 else out


def eval_dfda_limits():
    """``(lim a->0+, lim a->1-)`` of df/da: ``(pi^2/4 - pi/2, 1/2)``."""
    return PI * PI / 4 - PI / 2, 0.5


# ----------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class IntegrandSpec:
    """One catalog entry."""

    id: str
    axes: tuple
    axis_names: tuple
    kernel: Callable
    formula: str
    anchor: str
    singularities: tuple = ()
    prefactor: float = 1.0
    prefactor_label: str = "1"
    offset: float = 0.0
    offset_label: str = ""
    parametric: bool = False
    default_param: Optional[float] = None
    rule: str = "gk"

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def domain(self):
        return self.axes[0] if self.dimension == 1 else BoxDomain(self.axes)

    def _param(self, param):
        if param is None:
            param = self.default_param
        if self.parametric and param is None:
            raise ValueError(f"{self.id} needs a parameter")
        if not self.parametric and param is not None:
            raise ValueError(f"{self.id} takes no parameter")
        return param

    def evaluator(self, *coords, param=None):
        """Pointwise value at the original coordinates (vectorised)."""
        if len(coords) != self.dimension:
            raise ValueError(f"{self.id} expects {self.dimension} coordinates, got {len(coords)}")
        param = self._param(param)
        xs = tuple(np.asarray(c, dtype=float) for c in coords)
        for name, ax, c in zip(self.axis_names, self.axes, xs):
            if np.any(c < ax.lo) or np.any(c > ax.hi) or np.any(np.isnan(c)):
                raise DomainError(f"{self.id}: {name} outside {ax.describe()}")
        lo = tuple(c - ax.lo for c, ax in zip(xs, self.axes))
        hi = tuple(ax.hi - c for c, ax in zip(xs, self.axes))
        with np.errstate(all="ignore"):
            val = np.asarray(self.kernel(xs, lo, hi, param), dtype=float)
        if not np.all(np.isfinite(val)):
            # closed endpoints are accepted only where the kernel has a finite value
            raise DomainError(f"{self.id}: integrand not finite at the given point")
        return val[()] if val.ndim == 0 else val

    def unit_integrand(self, param=None, check=True):
        """Integrand over the unit box, Jacobians of the axis maps included.

        With ``check`` a non-finite value raises IntegrandEvaluationError
        carrying the full coordinate of the failing point.
        """
        param = self._param(param)
        axes = self.axes

        def g(*W):
            xs, lo, hi = [], [], []
            jac = 1.0
            for ax, w in zip(axes, W):
                x, j, lg, hg = ax.map_unit(w)
                xs.append(x)
                lo.append(lg)
                hi.append(hg)
                jac = jac * j
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = np.asarray(self.kernel(tuple(xs), tuple(lo), tuple(hi), param), dtype=float)
                val = val * jac
            if check:
                bad = ~np.isfinite(val)
                if bad.any():
                    i = int(np.argmax(bad))
                    raise IntegrandEvaluationError(
                        tuple(float(x[i]) for x in xs), float(val[i]),
                        f"{self.id}: non-finite value at {tuple(float(x[i]) for x in xs)}")
            return val

        return g

    def scaled(self, integral: float) -> float:
        return self.offset + self.prefactor * integral

    def describe(self) -> dict:
        return {
            "id": self.id,
            "dimension": self.dimension,
            "domain": [f"{n} in {ax.describe()}" for n, ax in zip(self.axis_names, self.axes)],
            "integrand": self.formula,
            "prefactor": self.prefactor_label,
            "parametric": self.parametric,
            "singularities": list(self.singularities),
            "anchor": self.anchor,
        }


def _unit(lo, hi, cluster=None, power=3, transform="none"):
    return Interval1D(lo, hi, transform=transform, cluster=cluster, power=power)


def _semi(cluster=None, transform="log_map", power=3):
    return Interval1D(0.0, math.inf, transform=transform, cluster=cluster, power=power)


_P = _unit(0.0, 1.0, "hi")
_X_SYM = _unit(-1.0, 1.0, "both")
_PHI_HI = _unit(0.0, HALF_PI, "hi")
_R_LO = _semi("lo")
_CORNER = "corner (p,q,|x|)->(1,1,1): 1-p^2q^2 -> 0 and a -> 1"

_ENTRIES = [
    IntegrandSpec(
        "E5_X1", (_P, _P, _X_SYM), ("p", "q", "x"), _e5_x1,
        "F(p,q,x) / ((1-p^2q^2)(1+q^2))",
        "X1 as a triple integral over p, q in [0,1], x in [-1,1]",
        (_CORNER,), -16 * PI, "-16 pi"),
    IntegrandSpec(
        "E5_X2", (_P, _P, _X_SYM), ("p", "q", "x"), _e5_x2,
        "q^2 F(p,q,x) / ((1-p^2q^2)(1+q^2))",
        "X2 as a triple integral over p, q in [0,1], x in [-1,1]",
        (_CORNER,), 16 * PI, "16 pi"),
    IntegrandSpec(
        "E8_X", (_P, _P, _X_SYM), ("q", "p", "x"), _e8,
        "F(p,q,x) / (1-p^2q^2)",
        "difference X2 - X1 combined into one triple integral",
        (_CORNER,), 16 * PI, "16 pi"),
    IntegrandSpec(
        "E9_X", (_P, _P, _unit(0.0, 1.0, "hi")), ("p", "q", "x"), _e9,
        "atan2(2 beta sqrt((1+alpha^2)(1-x^2)), alpha^2-beta^2+1-x^2) / ((1-p^2q^2)(a^2-x^2))",
        "even part in x folded onto [0,1], combined arctangent",
        ("corner (p,q,x)->(1,1,1)", "arctangent denominator changes sign: two-argument form"),
        16 * PI, "16 pi"),
    IntegrandSpec(
        "E10_X", (_R_LO, _R_LO, _PHI_HI), ("u", "v", "phi"), _e10,
        "cos phi atan2((sinh(u+v)+sinh(v-u)) cos phi, sinh(u+v) sinh(u-v)+cos^2 phi)"
        " / (sinh(u+v) (sinh^2(u+v)+cos^2 phi))",
        "exponential substitution q=e^-u, p=e^-v, x=sin phi",
        ("corner u+v->0, phi->pi/2",), 8 * PI, "8 pi"),
    IntegrandSpec(
        "E11_X", (_R_LO, _unit(-1.0, 1.0), _PHI_HI), ("r", "t", "phi"), _e11,
        "r cos phi atan2((sinh r + sinh s) cos phi, cos^2 phi - sinh r sinh s)"
        " / (sinh r (sinh^2 r + cos^2 phi)),  s = r t",
        "rotation r = v+u, s = v-u with Jacobian 1/2",
        ("corner r->0, phi->pi/2",), 4 * PI, "4 pi"),
    IntegrandSpec(
        "E13_X", (_R_LO, _unit(-1.0, 1.0), _PHI_HI), ("r", "t", "phi"), _e13,
        "r cos phi [atan(sinh r/cos phi) + atan(sinh s/cos phi)] / (sinh r (cos^2 phi + sinh^2 r)),"
        "  s = r t",
        "arctangent split into a sum of two single arctangents",
        ("corner r->0, phi->pi/2",), 4 * PI, "4 pi"),
    IntegrandSpec(
        "E14_X", (_R_LO, _PHI_HI), ("r", "phi"), _e14,
        "(r/sinh r) atan(sinh r/cos phi) cos phi / (cos^2 phi + sinh^2 r)",
        "s-integration performed, odd part dropped",
        ("corner r->0, phi->pi/2",), 8 * PI, "8 pi"),
    IntegrandSpec(
        "E15_X", (_semi(), _unit(0.0, 1.0, "lo", 2, "tanh_sinh")), ("r", "w"), _e15,
        "(r/sinh r) cos mu psi cos psi / sqrt(sin^2 psi - sin^2 mu) (pi/2 - mu),"
        "  psi = mu + (pi/2 - mu) w, mu = arccos(sech r)",
        "phi-integral rewritten through tan psi = sec phi sinh r",
        ("inverse square root at w->0 (psi->mu)",), 8 * PI, "8 pi"),
    IntegrandSpec(
        "E16_X", (_semi(transform="tanh_sinh"),), ("r",), _e16,
        "r sech r ln(1 + sech r) / sinh r",
        "single r-integral after the psi-integration",
        ("limit ln 2 at r->0",), 4 * PI**2, "4 pi^2", rule="ts"),
    IntegrandSpec(
        "E17_F", (_semi("lo"),), ("r",), _e17,
        "r ln(1 + a sech r) / (sinh r cosh r)",
        "parametric integral f(a) with f(1) the single r-integral",
        ("log singularity at r->0 for the minus-sign variant at a=1",),
        parametric=True, default_param=1.0),
    IntegrandSpec(
        "E19_INNER", (_semi(),), ("r",), _e19,
        "ln(1 + a sech r)",
        "remaining integral after integration by parts in df/da",
        (), parametric=True, default_param=1.0),
    IntegrandSpec(
        "E21_THETA", (_unit(0.0, HALF_PI),), ("theta",), _e21,
        "[theta^2 - (pi^2/8)(1 - cos 2 theta)] / sin 2 theta",
        "theta-form of the a-integral of df/da, a = cos theta",
        ("removable 0/0 at theta->pi/2",), 4 * PI**2, "4 pi^2", PI**4 * math.log(2), "pi^4 ln2"),
    IntegrandSpec(
        "E22_PHI", (_unit(0.0, HALF_PI),), ("phi",), _e22,
        "c phi (phi - pi) / sin phi",
        "phi = 2 theta with [pi/2, pi] folded back; c is the inner coefficient",
        ("removable limit -c pi at phi->0",), 4 * PI**2, "4 pi^2", PI**4 * math.log(2), "pi^4 ln2",
        parametric=True, default_param=4.0),
    IntegrandSpec(
        "E23_A", (_unit(0.0, HALF_PI),), ("phi",), _e23a,
        "phi / sin phi", "Catalan integral, value 2G", ("removable limit 1 at phi->0",)),
    IntegrandSpec(
        "E23_B", (_unit(0.0, HALF_PI),), ("phi",), _e23b,
        "phi^2 / sin phi", "Catalan/zeta(3) integral, value 2 pi G - (7/2) zeta(3)",
        ("removable limit 0 at phi->0",)),
    IntegrandSpec(
        "T_SINH1", (_semi(),), ("r",), _t_sinh1,
        "r / sinh r", "tabulated integral used in df/da, value pi^2/4", ()),
    IntegrandSpec(
        "T_SINH2", (_semi(),), ("r",), _t_sinh2,
        "r / sinh 2r", "tabulated integral used in df/da, value pi^2/16", ()),
]

CATALOG = {e.id: e for e in _ENTRIES}

FUNCTIONS = {
    "E20_DFDA": (eval_dfda, "df/da = -(pi^2/8a)(1-a)/(1+a) + (arccos a)^2/(2a(1-a^2))",
                 "closed-form derivative of f(a), a in [0, 1]"),
}


def get_entry(id: str) -> IntegrandSpec:
    try:
        return CATALOG[id]
    except KeyError:
        raise UnknownNameError("catalog id", id) from None


def list_entries() -> list[dict]:
    """Descriptions of all integrands in registry order."""
    return [e.describe() for e in _ENTRIES]


def list_functions() -> list[dict]:
    return [{"id": k, "formula": v[1], "anchor": v[2], "dimension": 1} for k, v in FUNCTIONS.items()]


def eval_entry(id: str, point, parameter=None):
    """Value of a catalog integrand (or the df/da function) at ``point``."""
    if id in FUNCTIONS:
        pt = tuple(np.atleast_1d(point)) if not isinstance(point, tuple) else point
        if len(pt) != 1:
            raise ValueError(f"{id} expects 1 coordinate, got {len(pt)}")
        if parameter is not None:
            raise ValueError(f"{id} takes no parameter")
        return FUNCTIONS[id][0](pt[0])
    entry = get_entry(id)
    pt = point if isinstance(point, (tuple, list)) else (point,)
    return entry.evaluator(*pt, param=parameter)
