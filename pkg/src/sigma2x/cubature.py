"""Two- and three-dimensional integration over boxes.

Three independent strategies share one convention: an integrand is pulled
back to the unit cube through the per-axis maps of :class:`Interval1D`
(semi-infinite log map, endpoint clustering), Jacobians included.

* ``integrate_iterated`` nests the batched Gauss-Kronrod rule: each level
  integrates a whole batch of inner integrals at once and feeds the inner
  error estimates upward.
* ``integrate_adaptive_nd`` is globally adaptive Genz-Malik degree 7/5
  cubature with region bisection.
* ``integrate_mc`` is a plain seeded Monte Carlo mean estimator.

All three are deterministic and independent of the worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import IntegrandEvaluationError
from .quad1d import (CONVERGED, GK_NODES, GK_WEIGHTS, MAX_DEPTH, MAX_EVALS, Budget,
                     Interval1D, Limits, evaluate_blocks, gk_lanes, tanh_sinh_unit)
from .summation import fsum

DEFAULT_REL_TOL = {1: 1e-10, 2: 1e-9, 3: 1e-7}
CUBATURE_LIMITS = Limits(max_evals=100_000_000)

ITERATED = "iterated"
ADAPTIVE_ND = "adaptive_nd"
MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class BoxDomain:
    """Product of two or three :class:`Interval1D` axes."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if len(axes) not in (2, 3):
            raise ValueError(f"box dimension must be 2 or 3, got {len(axes)}")
        for ax in axes:
            if not isinstance(ax, Interval1D):
                raise TypeError("box axes must be Interval1D instances")

    @property
    def dimension(self) -> int:
        return len(self.axes)


@dataclass(frozen=True)
class CubatureResult:
    value: float
    error_estimate: float
    n_evals: int
    subdivisions: int
    status: str
    strategy: str
    std_error: Optional[float] = None
    seed: Optional[int] = None
    generator: Optional[str] = None
    rejected: int = 0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


# ----------------------------------------------------------------------------
# unit-cube pull-back


class _Counted:
    """Unit-cube integrand with an evaluation counter and block evaluation."""

    def __init__(self, g, dim, limits):
        self.g = g
        self.dim = dim
        self.limits = limits
        self.n = 0

    def __call__(self, *W):
        W = [np.asarray(w, dtype=float) for w in W]
        self.n += W[0].size
        return evaluate_blocks(self.g, W, self.limits.block_size, self.limits.workers)


def _pullback(f, axes, check=True):
    def g(*W):
        xs, jac = [], 1.0
        for ax, w in zip(axes, W):
            x, j, _, _ = ax.map_unit(w)
            xs.append(x)
            jac = jac * j
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = np.asarray(f(*xs), dtype=float) * jac
        val = np.broadcast_to(val, xs[0].shape).astype(float)
        if check:
            bad = ~np.isfinite(val)
            if bad.any():
                i = int(np.argmax(bad))
                raise IntegrandEvaluationError(tuple(float(x[i]) for x in xs), float(val[i]))
        return val
    return g


def unit_function(integrand, domain=None, param=None, check=True):
    """``(g, dim)`` where ``g(*W)`` is the integrand pulled back to the unit cube.

    ``integrand`` is either a catalog entry (anything with ``axes`` and
    ``unit_integrand``) or a vectorised callable ``f(*x)`` with a domain.
    """
    if hasattr(integrand, "unit_integrand"):
        return integrand.unit_integrand(param, check=check), len(integrand.axes)
    if domain is None:
        raise ValueError("a plain callable needs a domain")
    axes = domain.axes if isinstance(domain, BoxDomain) else (domain,)
    return _pullback(integrand, axes, check), len(axes)


def _rel_default(rel_tol, dim):
    if rel_tol is None:
        rel_tol = DEFAULT_REL_TOL[dim]
    if rel_tol < 0:
        raise ValueError("tolerances must be non-negative")
    return rel_tol


def _rough(g, dim, pieces=4):
    """Product Gauss-Kronrod estimate of (integral, integral of |g|)."""
    w1 = ((np.arange(pieces)[:, None] + 0.5 * (1 + GK_NODES)[None, :]) / pieces).ravel()
    wt1 = np.tile(GK_WEIGHTS / (2 * pieces), pieces)
    grids = np.meshgrid(*([w1] * dim), indexing="ij")
    wts = np.ones(())
    for _ in range(dim):
        wts = np.multiply.outer(wts, wt1)
    vals = g(*(c.ravel() for c in grids)).reshape(wts.shape)
    return fsum(vals * wts), fsum(np.abs(vals) * wts), vals.size


# ----------------------------------------------------------------------------
# iterated


def integrate_iterated(integrand, domain=None, abs_tol: float = 0.0,
                       rel_tol: Optional[float] = None, limits: Limits = CUBATURE_LIMITS, *,
                       param=None, order: Optional[Sequence[int]] = None,
                       level_ratio: float = 0.3) -> CubatureResult:
    """Nested one-dimensional Gauss-Kronrod integration.

    ``order`` lists the axes from outermost to innermost (default: declared
    order).  Level ``k`` (0 = outermost) works to ``level_ratio**k`` times
    the requested tolerance; the absolute part of every level's tolerance is
    scaled by a coarse product-rule estimate of the integral, so that inner
    integrals near zero are not refined to pure relative accuracy.
    """
    g, dim = unit_function(integrand, domain, param)
    rel_tol = _rel_default(rel_tol, dim)
    if abs_tol <= 0 and rel_tol <= 0:
        raise ValueError("need a positive tolerance")
    order = tuple(range(dim)) if order is None else tuple(order)
    if sorted(order) != list(range(dim)):
        raise ValueError(f"order must be a permutation of 0..{dim - 1}")
    gc = _Counted(g, dim, limits)
    budget = Budget(limits.max_evals)

    est, est_abs, n0 = _rough(gc, dim)
    budget.used += n0
    scale = max(abs(est), 1e-3 * est_abs) or 1.0
    base_abs = max(abs_tol, rel_tol * scale)

    def ev(coords):
        W = [None] * dim
        for axis, c in zip(order, coords):
            W[axis] = c
        return gc(*W)

    def solve(k, fixed):
        n = fixed[0].size if fixed else 1
        ratio = level_ratio**k

        def f(lane, w):
            coords = [c[lane] for c in fixed] + [w]
            if k == dim - 1:
                return ev(coords)
            inner = solve(k + 1, coords)
            return inner.value, inner.error

        return gk_lanes(f, n, 0.0, 1.0, base_abs * ratio, rel_tol * ratio, limits, budget)

    res = solve(0, [])
    return CubatureResult(float(res.value[0]), float(res.error[0]), gc.n,
                          int(res.subdivisions[0]), res.status[0], ITERATED)


# ----------------------------------------------------------------------------
# Genz-Malik


_L2 = math.sqrt(9 / 70)
_L3 = math.sqrt(9 / 10)
_L4 = math.sqrt(9 / 10)
_L5 = math.sqrt(9 / 19)


def genz_malik_rule(dim: int):
    """Generator points on [-1, 1]^dim and degree-7 / degree-5 weights.

    Weights are normalised to sum to one (multiply by the region volume).
    Rows 1..4*dim are ordered ``+l2 e_i, -l2 e_i, +l3 e_i, -l3 e_i`` per axis,
    which :func:`_fourth_difference` relies on.
    """
    d = dim
    pts = [np.zeros(d)]
    w7 = [(12824 - 9120 * d + 400 * d * d) / 19683]
    w5 = [(729 - 950 * d + 50 * d * d) / 729]
    for i in range(d):
        for lam, a7, a5 in ((_L2, 980 / 6561, 245 / 486),
                            (_L3, (1820 - 400 * d) / 19683, (265 - 100 * d) / 1458)):
            for sgn in (1, -1):
                p = np.zeros(d)
                p[i] = sgn * lam
                pts.append(p)
                w7.append(a7)
                w5.append(a5)
    for i, j in itertools.combinations(range(d), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            p = np.zeros(d)
            p[i], p[j] = si * _L4, sj * _L4
            pts.append(p)
            w7.append(200 / 19683)
            w5.append(25 / 729)
    for signs in itertools.product((1, -1), repeat=d):
        pts.append(_L5 * np.array(signs, dtype=float))
        w7.append(6859 / 19683 / 2**d)
        w5.append(0.0)
    return np.array(pts), np.array(w7), np.array(w5)


def _fourth_difference(fv, dim):
    f0 = fv[:, :1]
    idx = 1 + 4 * np.arange(dim)
    f2 = fv[:, idx] + fv[:, idx + 1]
    f3 = fv[:, idx + 2] + fv[:, idx + 3]
    return np.abs(f2 - 2 * f0 - (_L2 / _L3) ** 2 * (f3 - 2 * f0))


def integrate_adaptive_nd(integrand, domain=None, abs_tol: float = 0.0,
                          rel_tol: Optional[float] = None, limits: Limits = CUBATURE_LIMITS, *,
                          param=None, max_batch: int = 4096) -> CubatureResult:
    """Globally adaptive Genz-Malik cubature on the unit-cube pull-back.

    Each round bisects, along the axis with the largest fourth difference
    (ties resolved toward the widest side), every region whose error exceeds
    the mean share of the tolerance, largest errors first and at most
    ``max_batch`` regions per round.  The final sum is order independent.
    """
    g, dim = unit_function(integrand, domain, param)
    if dim not in (2, 3):
        raise ValueError("adaptive cubature needs dimension 2 or 3")
    rel_tol = _rel_default(rel_tol, dim)
    if abs_tol <= 0 and rel_tol <= 0:
        raise ValueError("need a positive tolerance")
    gc = _Counted(g, dim, limits)
    pts, w7, w5 = genz_malik_rule(dim)
    npts = len(pts)

    def apply(c, h):
        X = c[:, None, :] + h[:, None, :] * pts[None, :, :]
        fv = gc(*(X[..., k].ravel() for k in range(dim))).reshape(len(c), npts)
        vol = np.prod(2 * h, axis=1)
        v7 = (fv @ w7) * vol
        v5 = (fv @ w5) * vol
        diff = _fourth_difference(fv, dim)
        # widest side wins among (near-)equal fourth differences
        near = diff >= diff.max(axis=1, keepdims=True) * (1 - 1e-12)
        axis = np.argmax(np.where(near, h, -1.0), axis=1)
        return v7, np.abs(v7 - v5), axis

    c = np.full((1, dim), 0.5)
    h = np.full((1, dim), 0.5)
    val, err, axis = apply(c, h)
    status = CONVERGED
    rounds = 0
    while True:
        total = fsum(val)
        tol = max(abs_tol, rel_tol * abs(total))
        if fsum(err) <= tol:
            break
        room = (limits.max_evals - gc.n) // (2 * npts)
        if room < 1:
            status = MAX_EVALS
            break
        share = tol / len(val)
        cand = np.nonzero(err > share)[0]
        cand = cand[np.lexsort((cand, -err[cand]))][:min(max_batch, room)]
        hs = h[cand].copy()
        ax = axis[cand]
        rows = np.arange(len(cand))
        if hs[rows, ax].min() < 2.0**-52:
            status = MAX_DEPTH
            break
        hs[rows, ax] *= 0.5
        lo_c = c[cand].copy()
        hi_c = c[cand].copy()
        lo_c[rows, ax] -= hs[rows, ax]
        hi_c[rows, ax] += hs[rows, ax]
        nc = np.concatenate([lo_c, hi_c])
        nh = np.concatenate([hs, hs])
        nv, ne, na = apply(nc, nh)
        keep = np.ones(len(val), bool)
        keep[cand] = False
        c = np.concatenate([c[keep], nc])
        h = np.concatenate([h[keep], nh])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        axis = np.concatenate([axis[keep], na])
        rounds += 1
    # region identity: lower corner, then size
    lower = c - h
    keys = [h[:, k] for k in reversed(range(dim))] + [lower[:, k] for k in reversed(range(dim))]
    order = np.lexsort(keys)
    return CubatureResult(fsum(val[order]), fsum(err[order]), gc.n, len(val) - 1,
                          status, ADAPTIVE_ND)


# ----------------------------------------------------------------------------
# Monte Carlo


MC_CHUNK = 1 << 16
MC_GENERATOR = "numpy PCG64, SeedSequence(seed, spawn_key=(chunk,))"
MAX_REJECTION_RATE = 1e-6


def _mc_chunk(g, dim, seed, chunk, m):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))
    vals = np.empty(0)
    rejected = 0
    need = m
    while need:
        U = rng.random((need, dim))
        with np.errstate(all="ignore"):
            v = np.asarray(g(*U.T), dtype=float)
        ok = np.isfinite(v)
        rejected += int((~ok).sum())
        vals = np.concatenate([vals, v[ok]])
        need = m - vals.size
        if rejected > max(1, MAX_REJECTION_RATE * m) * 100:
            break
    n = vals.size
    mean = fsum(vals) / n if n else 0.0
    m2 = fsum((vals - mean) ** 2) if n else 0.0
    return n, mean, m2, rejected


def integrate_mc(integrand, domain=None, n_samples: int = 1_000_000, seed: Optional[int] = None,
                 limits: Limits = CUBATURE_LIMITS, *, param=None) -> CubatureResult:
    """Plain Monte Carlo mean over the unit-cube pull-back.

    Samples are drawn in chunks of fixed size, each from its own generator
    derived from ``seed`` and the chunk index, and chunk statistics are
    combined in chunk order, so the result is bit-identical for a given
    ``(seed, n_samples)`` whatever the number of workers.  Non-finite samples
    are redrawn and counted; a rejection rate above 1e-6 is an error.
    """
    if seed is None:
        raise ValueError("Monte Carlo integration requires an explicit seed")
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 10^4")
    g, dim = unit_function(integrand, domain, param, check=False)
    sizes = [min(MC_CHUNK, n_samples - s) for s in range(0, n_samples, MC_CHUNK)]
    run = lambda k: _mc_chunk(g, dim, int(seed), k, sizes[k])  # noqa: E731
    if limits.workers > 1:
        with ThreadPoolExecutor(max_workers=limits.workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    n, mean, m2, rejected = 0, 0.0, 0.0, 0
    for nb, mb, m2b, rb in parts:
        # Chan et al. pairwise update
        if nb:
            tot = n + nb
            delta = mb - mean
            mean = mean + delta * nb / tot
            m2 = m2 + m2b + delta * delta * n * nb / tot
            n = tot
        rejected += rb
    if rejected > MAX_REJECTION_RATE * n_samples or n < n_samples:
        raise IntegrandEvaluationError(None, math.nan,
                                       f"{rejected} of {n_samples} Monte Carlo samples were non-finite")
    std = math.sqrt(m2 / (n - 1)) / math.sqrt(n)
    return CubatureResult(mean, std, n + rejected, 0, CONVERGED, MONTE_CARLO,
                          std_error=std, seed=int(seed), generator=MC_GENERATOR, rejected=rejected)


# ----------------------------------------------------------------------------
# one-dimensional entries


def integrate_1d(integrand, domain=None, abs_tol: float = 1e-12, rel_tol: float = 1e-12,
                 limits: Limits = Limits(), *, param=None, rule: str = "gk") -> CubatureResult:
    """Integrate a one-dimensional catalog entry or callable.

    ``rule="gk"`` runs adaptive Gauss-Kronrod on the unit pull-back (axis
    clustering included); ``rule="ts"`` runs tanh-sinh directly on the axis,
    passing endpoint gaps through to catalog kernels.
    """
    if rule == "gk":
        g, dim = unit_function(integrand, domain, param)
        if dim != 1:
            raise ValueError("integrate_1d needs a one-dimensional integrand")
        res = gk_lanes(lambda lane, w: g(w), 1, 0.0, 1.0, abs_tol, rel_tol, limits)
        return CubatureResult(float(res.value[0]), float(res.error[0]), res.n_evals,
                              int(res.subdivisions[0]), res.status[0], "gk")
    if rule != "ts":
        raise ValueError(f"unknown rule {rule!r}")
    if hasattr(integrand, "axes"):
        if len(integrand.axes) != 1:
            raise ValueError("integrate_1d needs a one-dimensional integrand")
        ax = integrand.axes[0]
        param = integrand._param(param)

        def kern(x, lo, hi):
            return integrand.kernel((x,), (lo,), (hi,), param)
    else:
        ax = domain

        def kern(x, lo, hi):
            return integrand(x)

    def fy(y, yc):
        x, jac, lo, hi = ax.map_y(y, yc, np.ones_like(y))
        inside = (lo > 0) & (hi > 0) & np.isfinite(x)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = np.asarray(kern(x[inside], lo[inside], hi[inside]), dtype=float) * jac[inside]
        bad = ~np.isfinite(v)
        if bad.any():
            i = int(np.argmax(bad))
            raise IntegrandEvaluationError(float(x[inside][i]), float(v[i]))
        return v, inside

    v, e, n, level, status = tanh_sinh_unit(fy, abs_tol, rel_tol, max_level=limits.ts_max_level,
                                            budget=Budget(limits.max_evals))
    return CubatureResult(v, e, n, level, status, "tanh_sinh")
