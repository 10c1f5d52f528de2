"""One-dimensional adaptive quadrature.

Two rules are provided:

* a 7/15-point Gauss-Kronrod pair with global bisection, vectorised over many
  independent integrals ("lanes") at once so that iterated cubature can push
  whole batches of inner integrals through numpy;
* a tanh-sinh (double exponential) rule for integrable endpoint singularities.

Semi-infinite ranges are mapped onto (0, 1] with ``r = lo - ln t``.  Axes may
additionally request polynomial clustering of nodes toward an endpoint, which
is how the corner singularities of the catalog integrands are regularised.

Integrands are vectorised: ``f(x: ndarray) -> ndarray``.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import IntegrandEvaluationError
from .summation import fsum, grouped_sum

CONVERGED = "converged"
MAX_DEPTH = "max_depth"
MAX_EVALS = "max_evals"

_EPS = np.finfo(float).eps

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[[1, 3, 5]] = _WG[:3]
G_WEIGHTS[[13, 11, 9]] = _WG[:3]
G_WEIGHTS[7] = _WG[3]


# ----------------------------------------------------------------------------
# intervals and endpoint maps


def _cluster(w, kind, k):
    """Map w in (0,1) to y in (0,1); returns (y, 1 - y, dy/dw)."""
    v = 1.0 - w
    if kind is None:
        return w, v, np.ones_like(w)
    if kind == "lo":
        return w**k, -np.expm1(k * np.log(w)), k * w ** (k - 1)
    if kind == "hi":
        return -np.expm1(k * np.log1p(-w)), v**k, k * v ** (k - 1)
    if kind == "both":
        if k == 2:
            return w * w * (3 - 2 * w), v * v * (3 - 2 * v), 6 * w * v
        return (w**3 * (10 - 15 * w + 6 * w * w), v**3 * (10 - 15 * v + 6 * v * v),
                30 * w * w * v * v)
    raise ValueError(f"unknown cluster kind {kind!r}")


@dataclass(frozen=True)
class Interval1D:
    """Integration range ``[lo, hi]`` or ``[lo, inf)``.

    ``transform`` is ``"none"``, ``"log_map"`` (semi-infinite only) or
    ``"tanh_sinh"`` (use the double-exponential rule).  ``cluster`` names the
    end(s) of the range toward which Gauss-Kronrod and cubature nodes are
    crowded by a power map of order ``power``.
    """

    lo: float
    hi: float = math.inf
    transform: str = "none"
    cluster: Optional[str] = None
    power: int = 3

    def __post_init__(self):
        if not math.isfinite(self.lo):
            raise ValueError("lower limit must be finite")
        if self.transform not in ("none", "log_map", "tanh_sinh"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.cluster not in (None, "lo", "hi", "both"):
            raise ValueError(f"unknown cluster {self.cluster!r}")
        if self.semi_infinite:
            if self.transform == "none":
                raise ValueError("semi-infinite interval needs log_map or tanh_sinh")
            if self.cluster in ("hi", "both"):
                raise ValueError("cannot cluster toward infinity")
        else:
            if not self.lo < self.hi:
                raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
            if self.transform == "log_map":
                raise ValueError("log_map applies to semi-infinite intervals only")
        if self.cluster == "both" and self.power not in (2, 3):
            raise ValueError("two-sided clustering supports power 2 or 3")
        if self.power < 1:
            raise ValueError("power must be >= 1")

    @classmethod
    def finite(cls, lo, hi, **kw):
        return cls(lo, hi, **kw)

    @classmethod
    def semi_infinite_from(cls, lo, transform="log_map", **kw):
        return cls(lo, math.inf, transform=transform, **kw)

    @property
    def semi_infinite(self) -> bool:
        return math.isinf(self.hi)

    @property
    def kind(self) -> str:
        return "semi_infinite" if self.semi_infinite else "finite"

    @property
    def is_affine(self) -> bool:
        return not self.semi_infinite and self.cluster is None

    def describe(self) -> str:
        rng = f"[{self.lo:g}, inf)" if self.semi_infinite else f"[{self.lo:g}, {self.hi:g}]"
        extra = [] if self.transform == "none" else [self.transform]
        if self.cluster:
            extra.append(f"cluster={self.cluster}^{self.power}")
        return rng + (f" ({', '.join(extra)})" if extra else "")

    def _unit_cluster(self):
        if self.semi_infinite:
            # r near lo corresponds to t near 1
            return ("hi" if self.cluster == "lo" else None), self.power
        return self.cluster, self.power

    def map_unit(self, w):
        """Map unit coordinates to the interval.

        Returns ``(x, jacobian, x - lo, hi - x)`` with both gaps computed
        without cancellation.
        """
        w = np.asarray(w, dtype=float)
        kind, k = self._unit_cluster()
        y, yc, dy = _cluster(w, kind, k)
        return self.map_y(y, yc, dy)

    def map_y(self, y, yc, dy):
        if self.semi_infinite:
            with np.errstate(divide="ignore"):
                gap = np.where(y > 0.5, -np.log1p(-yc), -np.log(y))
            return self.lo + gap, dy / y, gap, np.full_like(gap, math.inf)
        span = self.hi - self.lo
        lo_gap = span * y
        hi_gap = span * yc
        x = np.where(y <= 0.5, self.lo + lo_gap, self.hi - hi_gap)
        return x, span * dy, lo_gap, hi_gap


@dataclass(frozen=True)
class Limits:
    """Work limits for the adaptive rules."""

    max_depth: int = 60
    max_evals: int = 10_000_000
    ts_max_level: int = 12
    lane_chunk: int = 256
    block_size: int = 1 << 16
    workers: int = 1


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    n_evals: int
    subdivisions: int
    status: str

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


# ----------------------------------------------------------------------------
# evaluation helpers

_local = threading.local()


def evaluate_blocks(func, args, block_size, workers):
    """Evaluate ``func(*args)`` on fixed-size blocks, optionally in threads.

    Block boundaries depend only on ``block_size``, so the output is the
    same for any worker count.
    """
    n = args[0].shape[0]
    if n <= block_size:
        return func(*args)
    starts = range(0, n, block_size)
    pieces = [tuple(a[s:s + block_size] for a in args) for s in starts]
    if workers > 1 and not getattr(_local, "in_pool", False):
        def run(p):
            _local.in_pool = True
            try:
                return func(*p)
            finally:
                _local.in_pool = False
        with ThreadPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(run, pieces))
    else:
        outs = [func(*p) for p in pieces]
    if isinstance(outs[0], tuple):
        return tuple(np.concatenate(o) for o in zip(*outs))
    return np.concatenate(outs)


def _as_values(fx, shape):
    fx = np.asarray(fx, dtype=float)
    if fx.shape != shape:
        fx = np.broadcast_to(fx, shape).astype(float)
    return fx


def _check_finite(fx, points):
    bad = ~np.isfinite(fx)
    if bad.any():
        i = int(np.argmax(bad))
        raise IntegrandEvaluationError(float(points[i]), float(fx[i]))


class Budget:
    def __init__(self, max_evals):
        self.max_evals = max_evals
        self.used = 0

    @property
    def exhausted(self) -> bool:
        return self.used >= self.max_evals


# ----------------------------------------------------------------------------
# batched Gauss-Kronrod


@dataclass
class LaneResults:
    value: np.ndarray
    error: np.ndarray
    subdivisions: np.ndarray
    status: list
    n_evals: int


def gk_lanes(f, n_lanes, lo, hi, abs_tol, rel_tol, limits=Limits(), budget=None):
    """Integrate ``n_lanes`` functions over ``[lo, hi]`` simultaneously.

    ``f(lane, x)`` receives matching arrays of lane indices and abscissae and
    returns either values or a ``(values, inner_errors)`` pair; inner errors
    are integrated alongside and added to the lane's error estimate.

    Each lane is refined globally: while its summed error exceeds
    ``max(abs_tol, rel_tol*|I|)``, every leaf interval whose error exceeds
    the lane's tolerance divided by its leaf count is bisected.
    """
    budget = budget or Budget(limits.max_evals)
    abs_tol = np.broadcast_to(np.asarray(abs_tol, float), (n_lanes,))
    parts = []
    for s in range(0, n_lanes, limits.lane_chunk):
        t = min(n_lanes, s + limits.lane_chunk)
        sub = (lambda s_: (lambda lane, x: f(lane + s_, x)))(s)
        parts.append(_gk_chunk(sub, t - s, lo, hi, abs_tol[s:t], rel_tol, limits, budget))
    return LaneResults(
        np.concatenate([p.value for p in parts]),
        np.concatenate([p.error for p in parts]),
        np.concatenate([p.subdivisions for p in parts]),
        [st for p in parts for st in p.status],
        sum(p.n_evals for p in parts),
    )


def _gk_chunk(f, L, lo, hi, abs_tol, rel_tol, limits, budget):
    a = np.full(L, float(lo))
    b = np.full(L, float(hi))
    lane = np.arange(L)
    depth = np.zeros(L, dtype=np.int64)
    kv = np.empty(0)
    local = np.empty(0)
    prop = np.empty(0)
    fresh = np.ones(L, dtype=bool)
    n_evals = 0
    hit_depth = np.zeros(L, dtype=bool)
    while True:
        idx = np.nonzero(fresh)[0]
        c = 0.5 * (a[idx] + b[idx])
        h = 0.5 * (b[idx] - a[idx])
        x = (c[:, None] + h[:, None] * GK_NODES[None, :]).ravel()
        out = f(np.repeat(lane[idx], 15), x)
        inner = None
        if isinstance(out, tuple):
            out, inner = out
        fx = _as_values(out, x.shape)
        _check_finite(fx, x)
        fx = fx.reshape(-1, 15)
        n_evals += fx.size
        budget.used += fx.size
        kk = (fx @ GK_WEIGHTS) * h
        gg = (fx @ G_WEIGHTS) * h
        floor = 8 * _EPS * (np.abs(fx) @ GK_WEIGHTS) * h
        loc = np.abs(kk - gg) + floor
        pp = np.zeros_like(kk) if inner is None else (
            np.abs(_as_values(inner, x.shape)).reshape(-1, 15) @ GK_WEIGHTS) * h
        keep = ~fresh
        kv = np.concatenate([kv, kk]) if kv.size else kk
        local = np.concatenate([local, loc]) if local.size else loc
        prop = np.concatenate([prop, pp]) if prop.size else pp
        # re-order so arrays line up with (a, b, lane, depth)
        order = np.concatenate([np.nonzero(keep)[0], idx])
        a, b, lane, depth = a[order], b[order], lane[order], depth[order]

        err = local + prop
        tot_v = np.bincount(lane, kv, L)
        tot_e = np.bincount(lane, err, L)
        cnt = np.bincount(lane, minlength=L)
        tol = np.maximum(abs_tol, rel_tol * np.abs(tot_v))
        conv = tot_e <= tol
        if conv.all() or budget.exhausted:
            break
        share = tol[lane] / cnt[lane]
        want = ~conv[lane] & (local > 0.5 * share) & (local > 2 * floor_of(kv, local))
        at_cap = want & (depth >= limits.max_depth)
        hit_depth |= np.bincount(lane[at_cap], minlength=L) > 0
        split = want & ~at_cap
        if not split.any():
            break
        keep = ~split
        m = 0.5 * (a[split] + b[split])
        ds = depth[split] + 1
        a = np.concatenate([a[keep], a[split], m])
        b = np.concatenate([b[keep], m, b[split]])
        ls = lane[split]
        lane = np.concatenate([lane[keep], ls, ls])
        depth = np.concatenate([depth[keep], ds, ds])
        kv, local, prop = kv[keep], local[keep], prop[keep]
        fresh = np.concatenate([np.zeros(keep.sum(), bool), np.ones(2 * ls.size, bool)])

    value = grouped_sum(lane, a, kv, L)
    error = np.bincount(lane, local + prop, L)
    tol = np.maximum(abs_tol, rel_tol * np.abs(value))
    status = []
    for i in range(L):
        if error[i] <= tol[i]:
            status.append(CONVERGED)
        elif budget.exhausted:
            status.append(MAX_EVALS)
        else:
            status.append(MAX_DEPTH)
    return LaneResults(value, error, cnt - 1, status, n_evals)


def floor_of(kv, local):
    # leaves whose error is already at the rounding level are not split further
    return 8 * _EPS * np.abs(kv)


# ----------------------------------------------------------------------------
# tanh-sinh


_TS_TMAX = 6.1


def _ts_nodes(level):
    """Abscissae t of the level's new nodes (all nodes for level 0)."""
    h = 2.0**-level
    n = int(math.ceil(_TS_TMAX / h))
    j = np.arange(-n, n + 1)
    if level > 0:
        j = j[j % 2 != 0]
    return j * h, h


def tanh_sinh_unit(fy, abs_tol, rel_tol, max_level=12, min_level=3, budget=None):
    """Double-exponential rule on the unit interval.

    ``fy(y, yc)`` is evaluated at ``y in (0,1)`` with ``yc = 1 - y`` supplied
    separately so that integrands may resolve either endpoint.  Nodes that
    round onto an endpoint are dropped.  The error estimate is the change
    between successive levels plus the magnitude of the outermost terms.
    """
    budget = budget or Budget(math.inf)
    sums = []
    level_totals = []
    absum = []
    n_evals = 0
    prev = None
    trunc = 0.0
    nearest = [(math.inf, 0.0), (math.inf, 0.0)]
    for level in range(max_level + 1):
        t, h = _ts_nodes(level)
        s = math.pi * np.sinh(t)
        with np.errstate(over="ignore"):
            y = 1.0 / (1.0 + np.exp(-s))
            yc = 1.0 / (1.0 + np.exp(s))
        dy = math.pi * np.cosh(t) * y * yc
        ok = (y > 0.0) & (yc > 0.0) & (dy > 0.0)
        y, yc, dy, t = y[ok], yc[ok], dy[ok], t[ok]
        out = fy(y, yc)
        if isinstance(out, tuple):
            # (values, mask of nodes that map strictly inside the interval)
            out, inside = out
            y, yc, dy, t = y[inside], yc[inside], dy[inside], t[inside]
        fx = _as_values(out, y.shape)
        _check_finite(fx, y)
        n_evals += y.size
        budget.used += y.size
        terms = fx * dy
        sums.append(fsum(terms))
        absum.append(fsum(np.abs(terms)))
        if terms.size:
            # outermost DE terms bound the truncation of the t-range
            ends = np.argsort(np.abs(t))[-2:]
            trunc = max(trunc, float(np.max(np.abs(terms[ends]))))
            # |f| times the gap at the node nearest each endpoint bounds the
            # mass lost to nodes that rounded onto the endpoint
            for end, gap in enumerate((y, yc)):
                i = int(np.argmin(gap))
                if gap[i] < nearest[end][0]:
                    nearest[end] = (float(gap[i]), abs(float(fx[i])) * float(gap[i]))
        edge = trunc + nearest[0][1] + nearest[1][1]
        est = h * math.fsum(sums)
        level_totals.append(est)
        if prev is not None and level >= min_level:
            err = abs(est - prev) + edge + 8 * _EPS * h * math.fsum(absum)
            if err <= max(abs_tol, rel_tol * abs(est)):
                return est, float(err), n_evals, level, CONVERGED
            if budget.exhausted:
                return est, float(err), n_evals, level, MAX_EVALS
        prev = est
    err = abs(level_totals[-1] - level_totals[-2]) + edge
    return level_totals[-1], float(err), n_evals, max_level, MAX_DEPTH


# ----------------------------------------------------------------------------
# public API


def _mapped(f, interval):
    def g(w):
        x, jac, _, _ = interval.map_unit(w)
        fx = _as_values(f(x), x.shape)
        bad = ~np.isfinite(fx)
        if bad.any():
            i = int(np.argmax(bad))
            raise IntegrandEvaluationError(float(x[i]), float(fx[i]))
        return fx * jac
    return g


def integrate_adaptive(f: Callable, interval: Interval1D, abs_tol: float = 1e-10,
                       rel_tol: float = 1e-10, limits: Limits = Limits()) -> QuadResult:
    """Integrate a vectorised ``f`` over ``interval``.

    Budget exhaustion is reported through ``status``; a non-finite integrand
    value raises :class:`IntegrandEvaluationError` carrying the abscissa.
    """
    if not (abs_tol > 0 and rel_tol > 0):
        raise ValueError("tolerances must be positive")
    if interval.transform == "tanh_sinh":
        def fy(y, yc):
            x, jac, _, _ = interval.map_y(y, yc, np.ones_like(y))
            if interval.semi_infinite:
                inside = np.isfinite(x) & (x > interval.lo)
            else:
                inside = (x > interval.lo) & (x < interval.hi)
            return _checked(f, x[inside]) * jac[inside], inside
        v, e, n, level, status = tanh_sinh_unit(
            fy, abs_tol, rel_tol, max_level=limits.ts_max_level,
            budget=Budget(limits.max_evals))
        return QuadResult(v, e, n, level, status)

    if interval.is_affine:
        g = lambda lane, x: f(x)  # noqa: E731
        lo, hi = interval.lo, interval.hi
    else:
        gm = _mapped(f, interval)
        g = lambda lane, w: gm(w)  # noqa: E731
        lo, hi = 0.0, 1.0
    res = gk_lanes(g, 1, lo, hi, abs_tol, rel_tol, limits)
    return QuadResult(float(res.value[0]), float(res.error[0]), res.n_evals,
                      int(res.subdivisions[0]), res.status[0])


def _checked(f, x):
    fx = _as_values(f(x), x.shape)
    bad = ~np.isfinite(fx)
    if bad.any():
        i = int(np.argmax(bad))
        raise IntegrandEvaluationError(float(x[i]), float(fx[i]))
    return fx


def integrate_semi_infinite(f: Callable, lo: float = 0.0, abs_tol: float = 1e-10,
                            rel_tol: float = 1e-10, limits: Limits = Limits(), *,
                            method: str = "log_map", rule: str = "gk", cluster=None,
                            R: float = 40.0, tail_bound: Optional[float] = None) -> QuadResult:
    """Integrate an exponentially decaying ``f`` over ``[lo, inf)``.

    ``method="log_map"`` substitutes ``r = lo - ln t``.  ``method="truncate"``
    integrates ``[lo, lo + R]`` directly and adds a tail bound to the error
    estimate; by default the bound is ``2|f(lo + R)|``, valid for integrands
    decaying at least like ``e^{-r}`` beyond ``R``.
    """
    if method == "log_map":
        transform = "tanh_sinh" if rule == "ts" else "log_map"
        iv = Interval1D(lo, math.inf, transform=transform, cluster=cluster)
        return integrate_adaptive(f, iv, abs_tol, rel_tol, limits)
    if method != "truncate":
        raise ValueError(f"unknown semi-infinite method {method!r}")
    iv = Interval1D(lo, lo + R, transform="tanh_sinh" if rule == "ts" else "none",
                    cluster=cluster)
    res = integrate_adaptive(f, iv, abs_tol, rel_tol, limits)
    if tail_bound is None:
        tail_bound = 2.0 * abs(float(np.asarray(f(np.array([lo + R])))[0]))
    return replace(res, error_estimate=res.error_estimate + tail_bound)


def estimate_true_error(f: Callable, interval: Interval1D, exact: float, **kw):
    """Return ``(reported error estimate, actual |value - exact|)``."""
    res = integrate_adaptive(f, interval, **kw)
    return res.error_estimate, abs(res.value - exact)
