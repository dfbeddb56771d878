import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraceig.discretize import (
    build_grid,
    build_operator,
    build_weight,
    default_height,
    dirichlet_energy,
    extend_harmonic,
    half_apply,
    half_solve,
    laplace_residual,
    neumann_trace,
)


def test_grid_1d():
    g = build_grid(1, 3)
    assert g.h == 0.25
    np.testing.assert_allclose(g.x[:, 0], [-0.25, 0.0, 0.25])


def test_grid_2d():
    g = build_grid(2, 3)
    assert g.size == 9 and g.x.shape == (9, 2)
    assert np.all(np.abs(g.x) < 0.5)


@pytest.mark.parametrize("dim, n", [(1, 1), (1, 0), (3, 4)])
def test_grid_errors(dim, n):
    with pytest.raises(ValueError):
        build_grid(dim, n)


def test_operator_stencil_1d():
    op = build_operator(build_grid(1, 3))
    assert np.all(np.diag(op.A) == 32.0)
    assert op.A[0, 1] == -16.0 and op.A[1, 2] == -16.0 and op.A[0, 2] == 0.0
    assert op.lambda1 == pytest.approx(32 * (1 - math.cos(math.pi / 4)), rel=1e-12)
    assert op.lambda1 == pytest.approx(9.3726, abs=1e-4)


@pytest.mark.parametrize("n", [5, 16, 31])
def test_operator_analytic_eigenvalues_1d(n):
    op = build_operator(build_grid(1, n))
    h = 1 / (n + 1)
    k = np.arange(1, n + 1)
    exact = (2 / h**2) * (1 - np.cos(k * np.pi / (n + 1)))
    np.testing.assert_allclose(op.eigvals, exact, rtol=1e-11)


def test_operator_kronecker_sum_2d():
    n = 6
    one = build_operator(build_grid(1, n))
    two = build_operator(build_grid(2, n))
    pair_sums = np.sort(np.add.outer(one.eigvals, one.eigvals).ravel())
    np.testing.assert_allclose(two.eigvals, pair_sums, rtol=1e-11)


@pytest.mark.parametrize("dim, n", [(1, 8), (1, 33), (1, 64), (2, 5), (2, 11), (2, 16)])
def test_operator_invariants(dim, n):
    op = build_operator(build_grid(dim, n))
    scale = np.max(np.abs(op.A))
    assert np.max(np.abs(op.A_half @ op.A_half - op.A)) <= 1e-8 * scale
    assert np.all(op.eigvals > 0)
    Q = op.eigvecs
    assert np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) <= 1e-10
    off = op.A_half[~np.eye(op.grid.size, dtype=bool)]
    assert np.max(off) <= 1e-10
    assert np.min(op.A_half_inv) >= -1e-12
    assert np.all(op.phi1 > 0)


def test_half_apply_and_solve():
    op = build_operator(build_grid(1, 17))
    s = math.sqrt(op.lambda1)
    np.testing.assert_allclose(half_apply(op, op.phi1), s * op.phi1, atol=1e-12)
    np.testing.assert_allclose(half_solve(op, s * op.phi1), op.phi1, atol=1e-12)
    z = np.zeros(op.grid.size)
    assert np.all(half_apply(op, z) == 0) and np.all(half_solve(op, z) == 0)
    with pytest.raises(ValueError):
        half_apply(op, np.ones(3))
    with pytest.raises(ValueError):
        half_solve(op, np.ones(18))


@pytest.fixture(scope="module")
def op1():
    return build_operator(build_grid(1, 31))


@pytest.fixture(scope="module")
def op2():
    return build_operator(build_grid(2, 9))


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_half_apply_twice_is_laplacian(op1, data):
    u = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=31, max_size=31)))
    twice = half_apply(op1, half_apply(op1, u))
    ref = op1.A @ u
    assert np.max(np.abs(twice - ref)) <= 1e-8 * max(np.max(np.abs(ref)), 1.0)


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_half_solve_positivity(op2, data):
    rhs = np.array(data.draw(st.lists(st.floats(0, 1e3), min_size=81, max_size=81)))
    assert np.min(half_solve(op2, rhs)) >= -1e-12


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_trace_inequality_quadratic_form(op2, data):
    u = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=81, max_size=81)))
    assert u @ half_apply(op2, u) >= math.sqrt(op2.lambda1) * (u @ u) - 1e-10 * (1 + u @ u)


# extension -------------------------------------------------------------------------

def test_extension_of_ground_state(op1):
    s = math.sqrt(op1.lambda1)
    R = default_height(op1)
    field = extend_harmonic(op1, op1.phi1, R, 128)
    assert field.residual <= 1e-10
    exact = np.outer(op1.phi1, np.exp(-s * field.y))
    inner = slice(1, 64)  # lower half, away from the truncation
    err = np.max(np.abs(field.values[:, inner] - exact[:, inner])) / np.max(op1.phi1)
    assert err < 0.01


def test_extension_zero(op1):
    field = extend_harmonic(op1, np.zeros(31), 2.0, 16)
    assert np.all(field.values == 0)
    assert np.all(neumann_trace(field) == 0)


def test_extension_errors(op1):
    with pytest.raises(ValueError):
        extend_harmonic(op1, op1.phi1, 2.0, 4)
    with pytest.raises(ValueError):
        extend_harmonic(op1, op1.phi1, -1.0, 16)


def test_extension_residual_independent_check(op2):
    u = op2.phi1 + 0.5 * op2.phi(3)
    field = extend_harmonic(op2, u, 1.5, 20)
    assert laplace_residual(op2, field.values, field.hy) <= 1e-10
    assert np.all(field.values[:, -1] == 0)


def test_extension_refinement(op1):
    s = math.sqrt(op1.lambda1)
    u = op1.phi1 + 0.3 * op1.phi(1)
    R0 = 4 / s
    coarse = extend_harmonic(op1, u, R0, 32)
    fine = extend_harmonic(op1, u, 2 * R0, 128)
    truncation = math.exp(-s * R0)
    # compare on shared heights y = 0, hy0, ..., R0/2
    diff = np.max(np.abs(fine.values[:, 0:33:2] - coarse.values[:, :17]))
    assert diff < truncation * np.max(np.abs(u)) + 0.01 * np.max(np.abs(u))


def _trace_error(dim, n, m):
    op = build_operator(build_grid(dim, n))
    u = op.phi1 + 0.3 * op.phi(1)
    field = extend_harmonic(op, u, 6 / math.sqrt(op.lambda1), m)
    ref = half_apply(op, u)
    return np.linalg.norm(neumann_trace(field) - ref) / np.linalg.norm(ref)


def test_neumann_trace_matches_half_apply():
    e1 = _trace_error(1, 31, 64)
    e2 = _trace_error(1, 63, 128)
    assert e1 <= 0.05 and e2 < e1
    assert math.log2(e1 / e2) >= 1.0


def test_neumann_trace_ground_state(op1):
    s = math.sqrt(op1.lambda1)
    field = extend_harmonic(op1, op1.phi1, 6 / s, 64)
    err = np.linalg.norm(neumann_trace(field) - s * op1.phi1) / s
    assert err <= 0.05


def test_cylinder_energy_ground_state(op1):
    s = math.sqrt(op1.lambda1)
    field = extend_harmonic(op1, op1.phi1, default_height(op1), 64)
    energy = dirichlet_energy(op1, field)
    assert energy == pytest.approx(s * op1.grid.cell * (op1.phi1 @ op1.phi1), rel=0.05)


# weights ---------------------------------------------------------------------------

def test_weight_one():
    w = build_weight("one", build_grid(2, 7))
    assert w.gamma == 0.0 and np.all(w.values == 1.0)


@pytest.mark.parametrize("dim, n", [(1, 31), (2, 15), (2, 16)])
def test_weight_cospi(dim, n):
    grid = build_grid(dim, n)
    w = build_weight("cospi", grid)
    assert np.all(w.values > 0)
    assert w.gamma <= 1e-12
    if n % 2:
        assert w.gamma == pytest.approx(0.0, abs=1e-12)


def test_weight_cospi_ratio_1d():
    grid = build_grid(1, 63)
    w = build_weight("cospi", grid)
    x = grid.x[:, 0]
    exact = -np.pi * x * np.tan(np.pi * x)
    inner = np.abs(x) < 0.4
    np.testing.assert_allclose(w.ratio[inner], exact[inner], atol=5e-3)


def test_weight_bump():
    grid = build_grid(1, 31)
    w = build_weight("bump(1)", grid)
    xe = 0.5 - grid.h
    assert w.gamma == pytest.approx(2 * xe**2 / (1 + xe**2), rel=1e-12)
    assert 0.35 < w.gamma < 0.4


def test_weight_errors():
    with pytest.raises(ValueError):
        build_weight("gauss", build_grid(1, 5))
    with pytest.raises(ValueError):
        build_weight("bump(-10)", build_grid(1, 5))
