import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fraceig.nonlinearity import (
    GateError,
    big_h,
    cf_constant,
    check_invariants,
    criticality_ratio,
    find_scaling_mu,
    find_shift_k,
    make_preset,
    ratio,
    scaling_residual,
    shift_residual,
)

ALL = ["exp", "mems2", "mems1", "loglin", "power(3)", "power(1.5)"]


@pytest.mark.parametrize("name", ALL)
def test_preset_invariants(name):
    nl = make_preset(name)
    assert float(nl.f(0.0)) == 1.0
    assert check_invariants(nl) == []


def test_preset_classes():
    assert make_preset("exp").kind == "R" and make_preset("exp").log_convex
    assert make_preset("mems2").kind == "S"
    assert make_preset("mems1").a_f == 1.0
    assert make_preset("loglin").a_f == math.inf
    assert not make_preset("power", p=3).log_convex
    assert make_preset("power(3)").params == {"p": 3.0}


@pytest.mark.parametrize("bad", ["cosh", "power(1)", "power(0.5)", "power"])
def test_preset_errors(bad):
    with pytest.raises(ValueError):
        make_preset(bad)


@pytest.mark.parametrize(
    "name, expected",
    [
        ("exp", 1.0),  # int e^-t
        ("mems2", 1.0 / 3.0),  # int (1-t)^2
        ("mems1", 0.5),  # int (1-t)
        ("power(3)", 0.5),  # int (1+t)^-3
        ("power(1.5)", 2.0),  # 1/(p-1)
    ],
)
def test_cf_closed_forms(name, expected):
    assert cf_constant(make_preset(name)) == pytest.approx(expected, rel=1e-8)


def test_cf_loglin_diverges():
    nl = make_preset("loglin")
    assert cf_constant(nl) == math.inf
    assert nl.C_f == math.inf


@pytest.mark.parametrize("name", ALL)
def test_antiderivative_matches_quadrature(name):
    nl = make_preset(name)
    ts = [0.1, 0.5, 0.9] if nl.kind == "S" else [0.1, 1.0, 7.5, 30.0]
    for t in ts:
        q = integrate.quad(nl.f, 0, t, epsrel=1e-13)[0]
        assert float(nl.F(t)) == pytest.approx(q, rel=1e-8)


# find_shift_k ---------------------------------------------------------------

def _brute_min_shift(nl, lam, delta):
    t = np.linspace(0.0, 10.0, 2_000_001)
    return max(0.0, float(np.max((1 + delta) * nl.f(t) - nl.f(t / lam))))


@pytest.mark.parametrize("delta, expected", [(1.0, 1.0), (3.0, 4.0)])
def test_shift_k_exp(delta, expected):
    nl = make_preset("exp")
    k = find_shift_k(nl, 0.5, delta)
    assert k == pytest.approx(expected, rel=1e-2)
    assert k == pytest.approx(_brute_min_shift(nl, 0.5, delta), rel=1e-6)


def test_shift_k_grid_residual():
    nl = make_preset("exp")
    t = np.concatenate([[0.0], np.geomspace(1e-6, 50, 9999)])
    for lam, delta in [(0.5, 1.0), (0.3, 3.0), (0.9, 0.2)]:
        k = find_shift_k(nl, lam, delta)
        r = shift_residual(nl, lam, delta, k, t)
        assert np.all(r <= 1e-12 * (1 + np.abs(nl.f(t))))


def test_shift_k_mems_log_convex_power_gate():
    with pytest.raises(GateError):
        find_shift_k(make_preset("mems2"), 0.5, 1.0)
    with pytest.raises(GateError, match="not log-convex"):
        find_shift_k(make_preset("power(3)"), 0.5, 1.0)


# find_scaling_mu --------------------------------------------------------------

@pytest.mark.parametrize("name, eps", [("exp", 0.1), ("exp", 1.0), ("mems2", 1.0), ("mems1", 0.3)])
def test_scaling_mu_residual(name, eps):
    nl = make_preset(name)
    mu = find_scaling_mu(nl, eps)
    assert 0.5 < mu < 1.0
    # necessary condition at t = 0
    power = 2 if nl.kind == "R" else 1
    assert mu**power * (1 + eps) >= 1 + eps / 2
    t = np.linspace(0, mu, 10_000) if nl.kind == "S" else np.concatenate(
        [[0.0], np.geomspace(1e-6, 50, 9999)])
    assert np.min(scaling_residual(nl, mu, eps, t)) >= -1e-12


def test_scaling_mu_mems2_range():
    mu = find_scaling_mu(make_preset("mems2"), 1.0)
    assert 0.75 < mu < 1.0


def test_scaling_mu_gates():
    with pytest.raises(GateError):
        find_scaling_mu(make_preset("power(3)"), 0.1)
    with pytest.raises(ValueError):
        find_scaling_mu(make_preset("exp"), 0.0)


# criticality ----------------------------------------------------------------

def test_ratio_exp_closed_form():
    assert float(ratio(make_preset("exp"), 10.0)) == pytest.approx((1 - math.exp(-10)) / 10, rel=1e-12)


def test_ratio_exp_large_t_no_overflow():
    r = float(ratio(make_preset("exp"), 2000.0))
    assert r == pytest.approx(1 / 2000.0, rel=1e-12)


def test_criticality_exp():
    alpha, trend = criticality_ratio(make_preset("exp"), t_max=10.0)
    assert alpha < 0.11
    assert trend == "decreasing"


def test_criticality_power_limit():
    nl = make_preset("power(3)")
    alpha, trend = criticality_ratio(nl, t_max=1e6)
    assert alpha == pytest.approx(0.25, rel=1e-4)
    assert alpha > 0.25
    assert trend == "decreasing"


def test_criticality_mems2():
    nl = make_preset("mems2")
    assert float(ratio(nl, 0.99)) == pytest.approx(1e4 / 99, rel=1e-10)
    alpha, trend = criticality_ratio(nl, t_max=0.99)
    assert alpha == pytest.approx(1e4 / 99, rel=1e-8)
    assert trend == "increasing"


# H ----------------------------------------------------------------------------

def test_big_h_values():
    nl = make_preset("exp")
    assert float(big_h(nl, 0.0)) == 0.0
    assert float(big_h(nl, 1.0)) == pytest.approx((math.e**2 - 1) / 2 - (math.e - 1), rel=1e-12)
    assert float(big_h(nl, 1.0)) == pytest.approx(1.4762, abs=1e-4)


@pytest.mark.parametrize("name", ["mems2", "mems1", "power(3)", "exp", "loglin"])
def test_big_h_matches_quadrature(name):
    nl = make_preset(name)
    for t in [0.2, 0.5, 0.9]:
        q = integrate.quad(lambda s: nl.f2(s) * (nl.f(s) - 1), 0, t, epsrel=1e-13)[0]
        assert float(big_h(nl, t)) == pytest.approx(q, rel=1e-6, abs=1e-12)


def test_big_h_mems2_diverges():
    nl = make_preset("mems2")
    vals = big_h(nl, 1 - 10.0 ** -np.arange(1, 6))
    assert np.all(np.diff(vals) > 0) and vals[-1] > 1e20
    with pytest.raises(ValueError):
        big_h(nl, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    name=st.sampled_from(["exp", "mems2", "mems1", "power(3)", "loglin"]),
    a=st.floats(0.01, 0.98),
    b=st.floats(0.01, 0.98),
)
def test_big_h_lower_bound(name, a, b):
    # H(t) >= (f(T) - 1)(f'(t) - f'(T)) for 0 < T < t
    nl = make_preset(name)
    scale = 1.0 if nl.kind == "S" else 5.0
    T, t = sorted([a * scale, b * scale])
    if T == t:
        return
    lhs = float(big_h(nl, t))
    rhs = float((nl.f(T) - 1) * (nl.f1(t) - nl.f1(T)))
    assert lhs >= rhs - 1e-12 * max(1.0, abs(rhs))


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0.0, 0.999))
def test_big_h_nondecreasing(t):
    nl = make_preset("mems1")
    assert float(big_h(nl, t)) <= float(big_h(nl, min(t + 1e-4, 0.9999))) + 1e-12
