"""Pohozaev identity on the truncated cylinder and the small-lambda uniqueness certificate.

The certificate is a sampled check: S_lambda(x, tau) is evaluated on every
interior node and a tau grid, and the large-tau tail is covered by a lower
bound that is itself checked on a guard decade.  It is evidence for
uniqueness at a given lambda, not a proof.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .discretize import CylinderField, SpectralOperator, WeightField
from .nonlinearity import Nonlinearity, criticality_ratio, ratio
from .solve import BranchPoint, deflated_search

THETA_CAP = 0.95
TAU_MIN = 1e-4


def trace_constant(op: SpectralOperator) -> float:
    """Sharp discrete constant in |grad w|^2 >= C |w|^2: sqrt(lambda_1)."""
    return math.sqrt(op.lambda1)


def _trap(npts: int, spacing: float) -> np.ndarray:
    w = np.full(npts, spacing)
    w[0] = w[-1] = 0.5 * spacing
    return w


def _field_gradients(field: CylinderField):
    V = field.padded()
    h = field.grid.h
    spacings = [h] * field.grid.dim + [field.hy]
    grads = np.gradient(V, *spacings, edge_order=2)
    return V, grads[:-1], grads[-1]


def _padded_coords(field: CylinderField):
    ax = field.grid.padded_axis
    return np.meshgrid(*([ax] * field.grid.dim), indexing="ij")


def _surface(values: np.ndarray, field: CylinderField) -> float:
    """Trapezoid integral over the padded cross-section Omega."""
    out = values
    for _ in range(field.grid.dim):
        out = _trap(out.shape[0], field.grid.h) @ out
    return float(out)


def boundary_energy(field: CylinderField, R: float) -> float:
    """E(R) = int_{y=R} (x.grad_x v + R v_y) v_y - (R/2)|grad v|^2."""
    k = field.layer_index(R)
    Ry = k * field.hy
    _, gx, gy = _field_gradients(field)
    X = _padded_coords(field)
    xdot = sum(x * g[..., k] for x, g in zip(X, gx))
    vy = gy[..., k]
    sq = sum(g[..., k] ** 2 for g in gx) + vy**2
    return _surface((xdot + Ry * vy) * vy - 0.5 * Ry * sq, field)


@dataclass
class PohozaevTerms:
    lateral: float
    bottom: float
    bulk: float
    top: float
    R: float

    @property
    def terms(self) -> tuple:
        return (self.lateral, self.bottom, self.bulk, self.top)

    @property
    def residual(self) -> float:
        return sum(self.terms)

    @property
    def relative(self) -> float:
        big = max(abs(t) for t in self.terms)
        return abs(self.residual) / big if big > 0 else 0.0


def pohozaev_residual(grid, field: CylinderField, R: Optional[float] = None) -> PohozaevTerms:
    """The four terms of the Pohozaev identity on Omega x (0, R) and their sum.

    lateral: 1/2 int |grad v|^2 x.nu on the side, bottom: int x.grad_x v d_nu v
    at y = 0, bulk: (N-1)/2 int |grad v|^2, top: E(R).  For a harmonic field
    with zero lateral data the sum vanishes in the continuum.
    """
    if grid != field.grid:
        raise ValueError("field was computed on a different grid")
    if grid.dim != 2:
        raise ValueError("Pohozaev identity is checked for N >= 2 only; got a 1D grid")
    R = field.R if R is None else R
    k = field.layer_index(R)
    Ry = k * field.hy
    V, gx, gy = _field_gradients(field)
    N = grid.dim
    sq = sum(g**2 for g in gx) + gy**2
    wx = _trap(grid.n + 2, grid.h)
    wy = _trap(k + 1, field.hy)
    bulk = 0.5 * (N - 1) * float(np.einsum("i,j,k,ijk->", wx, wx, wy, sq[..., : k + 1]))
    # x.nu = 1/2 on every face of the centered square
    faces = [sq[0], sq[-1], sq[:, 0], sq[:, -1]]
    lateral = 0.5 * sum(0.5 * float(np.einsum("i,k,ik->", wx, wy, s[:, : k + 1])) for s in faces)
    X = _padded_coords(field)
    xdot0 = sum(x * g[..., 0] for x, g in zip(X, gx))
    bottom = _surface(xdot0 * (-gy[..., 0]), field)
    top = boundary_energy(field, Ry) if k > 0 else 0.0
    return PohozaevTerms(lateral, bottom, bulk, top, Ry)


def fit_decay_rate(Rs, values) -> float:
    """Slope of -log|E| against R by least squares."""
    Rs = np.asarray(Rs, dtype=float)
    logs = np.log(np.abs(np.asarray(values, dtype=float)))
    slope = np.polyfit(Rs, logs, 1)[0]
    return float(-slope)


# certificate -------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateParams:
    N: int
    theta: float
    big_c: float
    gamma: float
    eps_lambda: float


def x_dot_grad(grid, u: np.ndarray) -> np.ndarray:
    """x . grad u on the padded grid (boundary included), second-order differences."""
    U = grid.pad(u)
    grads = np.gradient(U, grid.h, edge_order=2) if grid.dim > 1 else [np.gradient(U, grid.h, edge_order=2)]
    ax = grid.padded_axis
    X = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    return sum(x * g for x, g in zip(X, grads))


def _brackets(nl: Nonlinearity, u, tau):
    with np.errstate(over="ignore", invalid="ignore"):
        fu = nl.f(u)
        fut = nl.f(u + tau)
        a = (fut - fu) * tau
        b = nl.F(u + tau) - nl.F(u) - fu * tau
        c = fut - fu - nl.f1(u) * tau
    return a, b, c


def s_lambda(nl: Nonlinearity, u, tau, lam: float, p: CertificateParams):
    """S_lambda(x, tau) with the worst-case constants gamma and eps_lambda."""
    a, b, c = _brackets(nl, u, tau)
    with np.errstate(over="ignore", invalid="ignore"):
        return (0.5 * p.theta * (p.N - 1) * a + (p.big_c / lam) * tau**2
                - (p.N + p.gamma) * b - p.eps_lambda * c)


def t_lambda(nl: Nonlinearity, u, tau, lam: float, p: CertificateParams, g_ratio, xgrad_u):
    """T_lambda(x, tau) with the node-wise x.grad g / g and x.grad u."""
    a, b, c = _brackets(nl, u, tau)
    with np.errstate(over="ignore", invalid="ignore"):
        return (0.5 * p.theta * (p.N - 1) * a + (p.big_c / lam) * tau**2
                - (p.N + g_ratio) * b - xgrad_u * c)


def tau_grid(nl: Nonlinearity, u: np.ndarray, tau_max: float = math.nan, points: int = 600):
    """Per-node tau samples, shape (nodes, points).

    Class R: geometric on [1e-4, tau_max].  Class S: on (0, 1 - u - 1e-6),
    geometrically refined toward the singular endpoint.
    """
    u = np.asarray(u)[:, None]
    if nl.kind == "R":
        return np.broadcast_to(np.geomspace(TAU_MIN, tau_max, points), (u.shape[0], points))
    d = 1.0 - u
    half = points // 2
    low = d * np.geomspace(TAU_MIN, 0.5, half, endpoint=False)
    # gaps to the singularity shrink geometrically from d/2 down to 1e-6
    s = np.linspace(0.0, 1.0, points - half)
    gap = np.exp((1 - s) * np.log(0.5 * d) + s * math.log(1e-6))
    return np.concatenate([low, d - gap], axis=1)


def s_lambda_min(point: BranchPoint, nl: Nonlinearity, params: CertificateParams,
                 tau_max: float = math.nan, lam: Optional[float] = None):
    """(min S, (node, tau)) over interior nodes and the tau grid.

    ``lam`` overrides the lambda in the C/lambda term while keeping the
    branch data of ``point``.
    """
    if not 0 < params.theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    lam = point.lam if lam is None else lam
    u = point.u
    tau = tau_grid(nl, u, tau_max)
    S = s_lambda(nl, u[:, None], tau, lam, params)
    i, j = np.unravel_index(int(np.nanargmin(S)), S.shape)
    return float(S[i, j]), (int(i), float(tau[i, j]))


def large_tau_bound(nl, u, tau, lam, p: CertificateParams, alpha: float):
    """Lower bound for S_lambda valid for tau >= tau0 (where F(s) < alpha s f(s))."""
    margin = 0.5 * p.theta * (p.N - 1) - alpha * (p.N + p.gamma)
    with np.errstate(over="ignore", invalid="ignore"):
        coef = tau * margin - p.eps_lambda - (p.N + p.gamma) * alpha * u
        out = nl.f(u + tau) * coef - 0.5 * p.theta * (p.N - 1) * nl.f(u) * tau + (p.big_c / lam) * tau**2
    return np.where(coef > 0, out, -np.inf)


def _tau0(nl, alpha, t_max, samples):
    t = np.geomspace(t_max / 1e3, t_max, samples)
    below = ratio(nl, t) < alpha
    if not below[-1]:
        return math.nan
    bad = np.flatnonzero(~below)
    return float(t[bad[-1] + 1]) if bad.size else float(t[0])


def _tau1(nl, u, lam, p, alpha, tau0):
    grid = np.geomspace(tau0, 1e3 * tau0, 400)
    L = large_tau_bound(nl, u[:, None], grid[None, :], lam, p, alpha)
    ok = np.all(L > 0, axis=0)
    if not ok[-1]:
        return math.nan
    bad = np.flatnonzero(~ok)
    start = bad[-1] + 1 if bad.size else 0
    tau1 = float(grid[start])
    # the guard decade beyond tau1 must be positive as well
    if grid[-1] < 10 * tau1:
        return math.nan
    return tau1


@dataclass
class UniquenessReport:
    lam: float
    N: int
    kind: str
    gamma: float
    alpha: float
    alpha_trend: str
    threshold: float
    theta: float
    trace_c: float
    big_c: float
    eps_lambda: float
    tau0: float
    tau1: float
    min_s: float
    min_s_node: int
    min_s_tau: float
    min_t: float
    condition_holds: bool
    certified: bool
    reason: str
    probe_solutions: int = -1
    probe_agrees: Optional[bool] = None
    extra: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def certificate_params(op, w: WeightField, point: BranchPoint,
                       theta_cap: float = THETA_CAP) -> CertificateParams:
    """Constants of the certificate.  The margin is increasing in theta, so theta sits at the cap."""
    grid = op.grid
    N = grid.dim
    gamma = w.gamma
    theta = theta_cap
    trace_c = trace_constant(op)
    big_c = (N - 1) * (1 - theta) * trace_c / (2 * w.max)
    eps_lambda = float(np.max(np.abs(x_dot_grad(grid, point.u))))
    return CertificateParams(N, theta, big_c, gamma, eps_lambda)


def uniqueness_certificate(point: BranchPoint, nl: Nonlinearity, w: WeightField,
                           op: SpectralOperator, probe: bool = True, seed: int = 0,
                           starts: int = 20, t_max: float = 10.0, samples: int = 1000,
                           theta_cap: float = THETA_CAP) -> UniquenessReport:
    """Sampled certificate that the minimal solution is the only solution at ``point.lam``.

    Class R: the criticality condition alpha < (N-1)/(2(N+gamma)) is checked
    first, then S_lambda > 0 on the (node, tau) samples up to ten times the
    large-tau threshold.  Class S skips the criticality condition.
    ``probe`` additionally runs a deflated Newton search from ``starts``
    random guesses and records whether it agrees.
    """
    grid = op.grid
    if grid.dim < 2:
        raise ValueError("uniqueness certificate needs N >= 2")
    N = grid.dim
    lam = point.lam
    if nl.kind == "R":
        alpha, trend = criticality_ratio(nl, t_max, samples)
    else:
        # f/F blows up at 1; the criticality condition does not apply
        alpha, trend = math.nan, "n/a"
    p = certificate_params(op, w, point, theta_cap)
    threshold = (N - 1) / (2 * (N + p.gamma))
    tau0 = tau1 = math.nan
    reason = ""
    if nl.kind == "R":
        condition = alpha < threshold
        if condition:
            tau0 = _tau0(nl, alpha, t_max, samples)
            tau1 = _tau1(nl, point.u, lam, p, alpha, tau0) if math.isfinite(tau0) else math.nan
        else:
            reason = "criticality condition fails"
    else:
        condition = True

    min_s, (node, tau_at) = math.nan, (-1, math.nan)
    min_t = math.nan
    if condition:
        if nl.kind == "R" and not math.isfinite(tau1):
            reason = "large-tau lower bound not positive"
        else:
            tau_max = 10 * tau1 if nl.kind == "R" else math.nan
            min_s, (node, tau_at) = s_lambda_min(point, nl, p, tau_max)
            tau = tau_grid(nl, point.u, tau_max)
            xg = x_dot_grad(grid, point.u)[(slice(1, -1),) * grid.dim].ravel()
            T = t_lambda(nl, point.u[:, None], tau, lam, p, w.ratio[:, None], xg[:, None])
            min_t = float(np.nanmin(T))
            if not min_s > 0:
                reason = "S_lambda not positive"
    certified = bool(condition and min_s > 0)
    if certified:
        reason = "certified"

    report = UniquenessReport(
        lam=lam, N=N, kind=nl.kind, gamma=p.gamma, alpha=alpha, alpha_trend=trend,
        threshold=threshold, theta=p.theta, trace_c=trace_constant(op), big_c=p.big_c,
        eps_lambda=p.eps_lambda, tau0=tau0, tau1=tau1, min_s=min_s, min_s_node=node,
        min_s_tau=tau_at, min_t=min_t, condition_holds=bool(condition),
        certified=certified, reason=reason,
    )
    if probe:
        found = deflated_search(op, w, nl, lam, starts=starts, seed=seed)
        report.probe_solutions = len(found)
        report.probe_agrees = (
            len(found) == 1 and float(np.max(np.abs(found[0].u - point.u))) <= 1e-6
        ) == certified if certified else None
        report.extra["probe"] = found
    return report
