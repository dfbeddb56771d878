"""Grids, the discrete Dirichlet Laplacian, its square root and the harmonic extension.

The domain is the centered interval (-1/2, 1/2) or square (-1/2, 1/2)^2,
sampled at ``n`` interior nodes per axis.  Nodes of a 2D grid are stored
flat in C order with axis 0 slow.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.n < 2:
            raise ValueError(f"need at least 2 interior nodes per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def axis(self) -> np.ndarray:
        """Interior coordinates along one axis."""
        return -0.5 + self.h * np.arange(1, self.n + 1)

    @property
    def padded_axis(self) -> np.ndarray:
        """Coordinates along one axis including the two boundary nodes."""
        return np.linspace(-0.5, 0.5, self.n + 2)

    @property
    def cell(self) -> float:
        """Quadrature weight h^dim of one node."""
        return self.h**self.dim

    @property
    def x(self) -> np.ndarray:
        """Node coordinates, shape (size, dim)."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def pad(self, values: np.ndarray) -> np.ndarray:
        """Embed nodal values (flat or shaped) with zero Dirichlet boundary."""
        v = np.asarray(values).reshape(self.shape + np.shape(values)[1:])
        width = [(1, 1)] * self.dim + [(0, 0)] * (v.ndim - self.dim)
        return np.pad(v, width)


def build_grid(dim: int, n: int) -> Grid:
    return Grid(dim, n)


def laplacian_1d(n: int, h: float) -> np.ndarray:
    return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    grid: Grid
    A: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    A_half: np.ndarray = field(repr=False)

    @property
    def lambda1(self) -> float:
        return float(self.eigvals[0])

    @property
    def phi1(self) -> np.ndarray:
        return self.eigvecs[:, 0]

    def phi(self, k: int) -> np.ndarray:
        return self.eigvecs[:, k]

    @property
    def A_half_inv(self) -> np.ndarray:
        Q = self.eigvecs
        return (Q / np.sqrt(self.eigvals)) @ Q.T


def build_operator(grid: Grid) -> SpectralOperator:
    """Assemble -Laplacian (3/5-point, scaled 1/h^2) and its spectral square root."""
    T = laplacian_1d(grid.n, grid.h)
    if grid.dim == 1:
        A = T
    else:
        eye = np.eye(grid.n)
        A = np.kron(T, eye) + np.kron(eye, T)
    try:
        lam, Q = linalg.eigh(A)
    except linalg.LinAlgError as exc:
        raise SolverError(f"eigendecomposition failed: {exc}") from exc
    if lam[0] <= 0:
        raise SolverError("operator is not positive definite")
    # fix the sign so the ground state is positive
    Q = Q * np.where(Q.sum(axis=0) < 0, -1.0, 1.0)
    A_half = (Q * np.sqrt(lam)) @ Q.T
    A_half = 0.5 * (A_half + A_half.T)
    return SpectralOperator(grid, A, lam, Q, A_half)


def _check_size(op: SpectralOperator, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (op.grid.size,):
        raise ValueError(f"expected vector of length {op.grid.size}, got shape {u.shape}")
    return u


def half_apply(op: SpectralOperator, u) -> np.ndarray:
    """(-Delta)^{1/2} u via the eigen-expansion."""
    u = _check_size(op, u)
    Q = op.eigvecs
    return Q @ (np.sqrt(op.eigvals) * (Q.T @ u))


def half_solve(op: SpectralOperator, rhs) -> np.ndarray:
    """Solve (-Delta)^{1/2} u = rhs with zero Dirichlet data."""
    rhs = _check_size(op, rhs)
    Q = op.eigvecs
    return Q @ ((Q.T @ rhs) / np.sqrt(op.eigvals))


# harmonic extension -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CylinderField:
    """Discrete harmonic function on Omega_h x {0, hy, ..., R}.

    ``values[:, j]`` holds layer ``y_j = j * hy``; the lateral boundary is
    zero and not stored.
    """
    grid: Grid
    R: float
    m: int
    values: np.ndarray
    residual: float = 0.0

    @property
    def hy(self) -> float:
        return self.R / self.m

    @property
    def y(self) -> np.ndarray:
        return self.hy * np.arange(self.m + 1)

    def padded(self) -> np.ndarray:
        """Values with the lateral zero boundary, shape (n+2,[n+2,] m+1)."""
        return self.grid.pad(self.values)

    def layer_index(self, R: float) -> int:
        if R > self.R * (1 + 1e-12):
            raise ValueError(f"R={R:g} exceeds the truncation height {self.R:g}")
        k = int(round(R / self.hy))
        return min(k, self.m)


def laplace_residual(op: SpectralOperator, values: np.ndarray, hy: float) -> float:
    """Max-norm of the discrete Laplacian on open layers, relative to the stencil scale."""
    v = values
    lap = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / hy**2 - op.A @ v[:, 1:-1]
    scale = (4 * op.grid.dim / op.grid.h**2 + 4 / hy**2) * max(np.max(np.abs(v)), 1e-300)
    return float(np.max(np.abs(lap)) / scale) if lap.size else 0.0


def extend_harmonic(op: SpectralOperator, u, R: float, m: int, tol: float = 1e-10) -> CylinderField:
    """Discrete harmonic extension of ``u`` to the cylinder of height ``R``.

    The 3/5-point Laplacian in x is diagonalized by its eigenvectors, which
    leaves one second-order recurrence in y per mode; each recurrence with
    bottom value a_k and top value 0 is solved in closed form.
    """
    u = _check_size(op, u)
    if R <= 0:
        raise ValueError("R must be positive")
    if m < 8:
        raise ValueError("need at least 8 layers")
    hy = R / m
    a = op.eigvecs.T @ u
    # cosh(kappa) = 1 + lambda_k hy^2 / 2
    kappa = np.arccosh(1.0 + 0.5 * op.eigvals * hy**2)
    j = np.arange(m + 1)
    decay = np.exp(-np.outer(kappa, j))
    far = -np.expm1(-2.0 * np.outer(kappa, m - j))
    modes = decay * far / (-np.expm1(-2.0 * kappa * m))[:, None]
    values = op.eigvecs @ (a[:, None] * modes)
    values[:, 0] = u
    values[:, -1] = 0.0
    res = laplace_residual(op, values, hy)
    if not res <= tol:
        raise SolverError(f"harmonic extension residual {res:.3e} above {tol:.1e}")
    return CylinderField(op.grid, float(R), int(m), values, res)


def default_height(op: SpectralOperator, factor: float = 8.0) -> float:
    return factor / math.sqrt(op.lambda1)


def neumann_trace(field: CylinderField) -> np.ndarray:
    """-d/dy of the extension at y = 0 by the one-sided second-order difference."""
    if field.m < 3:
        raise ValueError("need at least 3 layers for the trace stencil")
    v = field.values
    return -(-3.0 * v[:, 0] + 4.0 * v[:, 1] - v[:, 2]) / (2.0 * field.hy)


def dirichlet_energy(op: SpectralOperator, field: CylinderField) -> float:
    """Discrete integral of |grad v|^2 over the cylinder.

    y-differences use the midpoint rule on each layer gap; the x part is the
    per-layer form <A v, v> h^dim weighted by the trapezoid rule in y.
    """
    v = field.values
    hy = field.hy
    cell = op.grid.cell
    dy = np.diff(v, axis=1) / hy
    y_part = cell * hy * np.sum(dy**2)
    w = np.full(field.m + 1, hy)
    w[0] = w[-1] = 0.5 * hy
    x_part = cell * np.sum(w * np.einsum("ij,ij->j", v, op.A @ v))
    return float(y_part + x_part)


# weights ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightField:
    grid: Grid
    name: str
    values: np.ndarray
    grad: np.ndarray  # shape (size, dim)

    @property
    def gamma(self) -> float:
        """max over interior nodes of x . grad g / g."""
        return float(np.max(self.ratio))

    @property
    def ratio(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.grid.x, self.grad) / self.values

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    def scaled(self, c: float) -> "WeightField":
        if c <= 0:
            raise ValueError("scale must be positive")
        return WeightField(self.grid, f"{c:g}*{self.name}", c * self.values, c * self.grad)


_WEIGHT_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def _weight_function(spec: str):
    m = _WEIGHT_RE.match(spec)
    if m is None:
        raise ValueError(f"unknown weight {spec!r}")
    name, arg = m.group(1), m.group(2)
    if name == "one":
        return name, lambda *xs: np.ones_like(xs[0])
    if name == "cospi":
        return name, lambda *xs: np.prod([np.cos(np.pi * x) for x in xs], axis=0)
    if name == "bump":
        c = float(arg) if arg else 1.0
        return f"bump({c:g})", lambda *xs: 1.0 + c * sum(x**2 for x in xs)
    raise ValueError(f"unknown weight {spec!r}")


def build_weight(spec: str, grid: Grid) -> WeightField:
    """Weight g on the grid with its central-difference gradient.

    ``spec`` is ``one``, ``cospi`` (vanishes on the boundary) or ``bump(c)``.
    """
    name, fun = _weight_function(spec)
    ax = grid.padded_axis
    mesh = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    g = fun(*mesh)
    grads = np.gradient(g, grid.h) if grid.dim > 1 else [np.gradient(g, grid.h)]
    inner = (slice(1, -1),) * grid.dim
    values = g[inner].ravel()
    grad = np.stack([d[inner].ravel() for d in grads], axis=1)
    if np.any(values <= 0):
        raise ValueError(f"weight {spec!r} is not positive at every interior node")
    return WeightField(grid, name, values, grad)
