import math

import numpy as np
import pytest

from sigma2x import catalog
from sigma2x.constants import get_constant
from sigma2x.cubature import integrate_1d
from sigma2x.errors import IntegrandEvaluationError
from sigma2x.quad1d import (CONVERGED, Interval1D, Limits, estimate_true_error,
                            integrate_adaptive, integrate_semi_infinite)

PI = math.pi
G = get_constant("CATALAN")
Z3 = get_constant("ZETA3")
LN2 = get_constant("LN2")
E16 = (PI**2 * LN2 - 3.5 * Z3) / 4


def test_polynomial():
    r = integrate_adaptive(lambda x: x * x, Interval1D(0, 1))
    assert r.value == pytest.approx(1 / 3, abs=1e-15)
    assert r.converged and r.error_estimate <= 1e-10


def test_catalan_integrals():
    r = integrate_adaptive(lambda p: p / np.sin(p), Interval1D(0, PI / 2), 1e-13, 1e-13)
    assert r.value == pytest.approx(2 * G, abs=1e-13)
    assert r.value == pytest.approx(1.8319311883544, abs=1e-13)
    r = integrate_adaptive(lambda p: p * p / np.sin(p), Interval1D(0, PI / 2), 1e-13, 1e-13)
    assert r.value == pytest.approx(2 * PI * G - 3.5 * Z3, abs=1e-13)
    assert r.value == pytest.approx(1.5479823, abs=1e-6)


def test_tanh_sinh_power_law_never_touches_endpoints():
    seen = []

    def f(x):
        seen.append(x.copy())
        return x**-0.5
    r = integrate_adaptive(f, Interval1D(0, 1, transform="tanh_sinh"), 1e-12, 1e-12)
    assert r.value == pytest.approx(2.0, abs=1e-11)
    assert r.converged
    xs = np.concatenate(seen)
    assert xs.min() > 0 and xs.max() < 1


def test_semi_infinite_identities():
    for f, exact in [(lambda r: r / np.sinh(r), PI**2 / 4),
                     (lambda r: r / np.sinh(2 * r), PI**2 / 16),
                     (lambda r: np.exp(-r), 1.0)]:
        for rule in ("gk", "ts"):
            with np.errstate(over="ignore", invalid="ignore"):
                r = integrate_semi_infinite(f, 0.0, 1e-13, 1e-13, rule=rule, cluster="lo" if rule == "gk" else None)
            assert r.converged
            assert r.value == pytest.approx(exact, abs=1e-12)
    assert PI**2 / 4 == pytest.approx(2.4674011003, abs=1e-10)
    assert PI**2 / 16 == pytest.approx(0.6168502751, abs=1e-10)


def _e16(r):
    with np.errstate(over="ignore"):
        s = 1 / np.cosh(r)
        return r * s * np.log1p(s) / np.sinh(r)


def test_transform_invariance_log_map_vs_truncation():
    a = integrate_semi_infinite(_e16, 0.0, 1e-13, 1e-13)
    b = integrate_semi_infinite(_e16, 0.0, 1e-13, 1e-13, method="truncate", R=40.0,
                                tail_bound=40 * math.exp(-80) * 2)
    assert abs(a.value - b.value) <= a.error_estimate + b.error_estimate
    assert a.value == pytest.approx(E16, abs=1e-13)


# known-value battery: (name, f, interval, exact)
BATTERY = [
    ("x^2", lambda x: x * x, Interval1D(0, 1), 1 / 3),
    ("phi/sin", lambda p: p / np.sin(p), Interval1D(0, PI / 2), 2 * G),
    ("phi^2/sin", lambda p: p * p / np.sin(p), Interval1D(0, PI / 2), 2 * PI * G - 3.5 * Z3),
    ("x^-1/2 ts", lambda x: x**-0.5, Interval1D(0, 1, transform="tanh_sinh"), 2.0),
    ("(1-x)^-1/2 ts", lambda x: (1 - x) ** -0.5, Interval1D(0, 1, transform="tanh_sinh"), 2.0),
    ("ln x ts", np.log, Interval1D(0, 1, transform="tanh_sinh"), -1.0),
    ("r/sinh r", lambda r: r / np.sinh(r), Interval1D(0, math.inf, "log_map", "lo"), PI**2 / 4),
    ("E16 ts", _e16, Interval1D(0, math.inf, "tanh_sinh"), E16),
    ("E16 gk", _e16, Interval1D(0, math.inf, "log_map", "lo"), E16),
    ("exp", lambda r: np.exp(-r), Interval1D(0, math.inf, "log_map"), 1.0),
    ("cos", np.cos, Interval1D(0, 10), math.sin(10)),
]


@pytest.mark.parametrize("name,f,iv,exact", BATTERY, ids=[b[0] for b in BATTERY])
@pytest.mark.parametrize("tol", [1e-6, 1e-10])
def test_error_honesty(name, f, iv, exact, tol):
    with np.errstate(over="ignore", invalid="ignore"):
        reported, actual = estimate_true_error(f, iv, exact, abs_tol=tol, rel_tol=tol)
    assert actual <= 10 * reported + 1e-15


ADDITIVITY = [
    (lambda p: p / np.sin(p), 0.0, PI / 2),
    (lambda x: np.exp(x) * np.cos(3 * x), -1.0, 2.0),
    (lambda x: np.sqrt(x), 0.0, 1.0),
]


@pytest.mark.parametrize("k", range(len(ADDITIVITY)))
def test_interval_additivity(k):
    f, lo, hi = ADDITIVITY[k]
    for c in np.linspace(lo, hi, 7)[1:-1]:
        whole = integrate_adaptive(f, Interval1D(lo, hi), 1e-12, 1e-12)
        left = integrate_adaptive(f, Interval1D(lo, c), 1e-12, 1e-12)
        right = integrate_adaptive(f, Interval1D(c, hi), 1e-12, 1e-12)
        total = whole.error_estimate + left.error_estimate + right.error_estimate
        assert abs(whole.value - left.value - right.value) <= total


def test_additivity_on_catalog_entries():
    for id in ("E23_A", "E23_B", "E21_THETA"):
        e = catalog.get_entry(id)
        f = lambda x: e.evaluator(x)  # noqa: E731
        whole = integrate_adaptive(f, Interval1D(0, PI / 2), 1e-12, 1e-12)
        parts = [integrate_adaptive(f, Interval1D(a, b), 1e-12, 1e-12)
                 for a, b in ((0, 0.4), (0.4, PI / 2))]
        total = whole.error_estimate + sum(p.error_estimate for p in parts)
        assert abs(whole.value - sum(p.value for p in parts)) <= total


def test_linearity():
    iv = Interval1D(0, PI / 2)
    f = lambda p: p / np.sin(p)  # noqa: E731
    g = lambda p: p * p / np.sin(p)  # noqa: E731
    a, b = 2.5, -0.75
    If, Ig = integrate_adaptive(f, iv), integrate_adaptive(g, iv)
    Ih = integrate_adaptive(lambda p: a * f(p) + b * g(p), iv)
    bound = abs(a) * If.error_estimate + abs(b) * Ig.error_estimate + Ih.error_estimate
    assert abs(Ih.value - (a * If.value + b * Ig.value)) <= bound


def test_nonfinite_value_raises_with_abscissa():
    with pytest.raises(IntegrandEvaluationError) as exc:
        integrate_adaptive(lambda x: np.where(x > 0.5, np.nan, 1.0), Interval1D(0, 1))
    assert exc.value.point > 0.5


def test_budget_exhaustion_is_a_status():
    r = integrate_adaptive(lambda x: np.abs(x - 0.3) ** 0.1, Interval1D(0, 1), 1e-14, 1e-14,
                           Limits(max_evals=200))
    assert r.status == "max_evals"
    assert math.isfinite(r.error_estimate) and r.error_estimate > 0
    r = integrate_adaptive(lambda x: x**-0.5, Interval1D(0, 1, transform="tanh_sinh"), 1e-16, 1e-16,
                           Limits(ts_max_level=4))
    assert r.status == "max_depth"


def test_bad_tolerances():
    with pytest.raises(ValueError):
        integrate_adaptive(np.sin, Interval1D(0, 1), 0.0, 1e-3)


@pytest.mark.parametrize("kw", [
    dict(lo=1.0, hi=1.0), dict(lo=0.0, hi=math.inf), dict(lo=0.0, hi=1.0, transform="log_map"),
    dict(lo=-math.inf, hi=0.0), dict(lo=0.0, hi=math.inf, transform="log_map", cluster="hi"),
])
def test_interval_validation(kw):
    with pytest.raises(ValueError):
        Interval1D(**kw)


def test_interval_kinds():
    assert Interval1D.finite(0, 1).kind == "finite"
    iv = Interval1D.semi_infinite_from(2.0)
    assert iv.kind == "semi_infinite" and iv.transform == "log_map"
    x, jac, lo, hi = iv.map_unit(np.array([0.25, 0.75]))
    np.testing.assert_allclose(x, 2.0 - np.log(np.array([0.25, 0.75])))


def test_map_gaps_are_exact_near_ends():
    iv = Interval1D(0.0, 1.0, cluster="hi")
    w = np.array([1 - 1e-6])
    x, jac, lo, hi = iv.map_unit(w)
    assert hi[0] == pytest.approx(1e-18, rel=1e-9)


def test_catalog_rules_agree():
    for id in ("E16_X", "E23_A", "E21_THETA", "T_SINH1"):
        e = catalog.get_entry(id)
        a = integrate_1d(e, rule="gk", abs_tol=1e-13, rel_tol=1e-13)
        b = integrate_1d(e, rule="ts", abs_tol=1e-13, rel_tol=1e-13)
        assert a.status == b.status == CONVERGED
        assert abs(a.value - b.value) <= a.error_estimate + b.error_estimate


def test_determinism_across_workers():
    f = lambda x: np.sin(50 * x) * np.exp(-x)  # noqa: E731
    base = integrate_adaptive(f, Interval1D(0, 3), 1e-13, 1e-13)
    for workers in (2, 4):
        r = integrate_adaptive(f, Interval1D(0, 3), 1e-13, 1e-13, Limits(workers=workers, block_size=64))
        assert r.value == base.value and r.error_estimate == base.error_estimate
