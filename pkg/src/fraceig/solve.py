"""Minimal solutions of A^{1/2} u = lam g f(u) and the extremal parameter.

The discrete square root is an M-matrix with a nonnegative inverse, so the
iteration ``u <- A^{-1/2}(lam g f(u))`` started from a subsolution climbs
monotonically to the minimal solution when one exists.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from .discretize import SpectralOperator, WeightField, half_solve
from .nonlinearity import Nonlinearity, NumericError, big_h, find_scaling_mu

BLOWUP_R = 50.0
S_MARGIN = 1e-8


class NoConvergence(RuntimeError):
    def __init__(self, reason: str, lam: float = math.nan, iterations: int = 0):
        super().__init__(f"{reason} (lambda={lam:.6g}, iterations={iterations})")
        self.reason = reason
        self.lam = lam
        self.iterations = iterations


class SingularJacobian(NoConvergence):
    pass


@dataclass(eq=False)
class BranchPoint:
    lam: float
    u: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    mu1: float

    @property
    def sup_u(self) -> float:
        return float(np.max(self.u)) if self.u.size else 0.0


@dataclass(eq=False)
class Branch:
    points: list
    lambda_star_bracket: Optional[tuple]
    u_star_est: Optional[BranchPoint] = None
    extremal_integral: float = math.nan

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])


def _guard(nl: Nonlinearity) -> float:
    return BLOWUP_R if nl.kind == "R" else 1.0 - S_MARGIN


def _escaped(nl, u) -> bool:
    return not np.all(np.isfinite(u)) or float(np.max(u, initial=0.0)) >= _guard(nl)


def residual(op: SpectralOperator, w: WeightField, nl: Nonlinearity, lam: float,
             u: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """A^{1/2} u - lam g (f(u) + shift)."""
    return op.A_half @ u - lam * w.values * (nl.f(u) + shift)


def stability_matrix(op, w, nl, lam, u) -> np.ndarray:
    return op.A_half - np.diag(lam * w.values * nl.f1(u))


def _smallest_eig(M: np.ndarray) -> float:
    return float(linalg.eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0])


def stability_eigenvalue(op, w, nl, point: BranchPoint) -> float:
    """Smallest eigenvalue of A^{1/2} - lam diag(g f'(u))."""
    return _smallest_eig(stability_matrix(op, w, nl, point.lam, point.u))


def _point(op, w, nl, lam, u, iterations, shift=0.0) -> BranchPoint:
    res = float(np.max(np.abs(residual(op, w, nl, lam, u, shift)), initial=0.0))
    mu1 = _smallest_eig(stability_matrix(op, w, nl, lam, u))
    return BranchPoint(float(lam), u, res, iterations, mu1)


def _iterate(op, w, nl, coef: float, shift: float, u0, tol, max_iter,
             callback: Optional[Callable] = None):
    """Fixed-point loop u <- A^{-1/2}(coef g (f(u) + shift)); returns (u, iterations)."""
    g = coef * w.values
    u = np.zeros(op.grid.size) if u0 is None else np.array(u0, dtype=float)
    fu = nl.f(u)
    for k in range(1, max_iter + 1):
        new = half_solve(op, g * (fu + shift))
        if _escaped(nl, new):
            raise NoConvergence("blow-up guard exceeded", coef, k)
        fnew = nl.f(new)
        step = float(np.max(np.abs(new - u), initial=0.0))
        res = float(np.max(g * np.abs(fnew - fu), initial=0.0))
        u, fu = new, fnew
        if callback is not None:
            callback(u)
        if step <= tol and res <= tol:
            return u, k
    raise NoConvergence("max_iter reached", coef, max_iter)


def monotone_solve(op: SpectralOperator, w: WeightField, nl: Nonlinearity, lam: float,
                   tol: float = 1e-10, max_iter: int = 10_000, u0=None,
                   callback: Optional[Callable] = None) -> BranchPoint:
    """Minimal solution by monotone iteration from ``u0`` (default 0).

    ``u0`` must be a subsolution, e.g. the minimal solution at a smaller
    lambda.  Raises :class:`NoConvergence` when the iterates hit the blow-up
    guard or ``max_iter``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    u, k = _iterate(op, w, nl, lam, 0.0, u0, tol, max_iter, callback)
    return _point(op, w, nl, lam, u, k)


def _deflation_gradient(u, roots, cell):
    """Value m(u) and grad(log m) for m = prod_r (1/|u - r|^2 + 1)."""
    m = 1.0
    glog = np.zeros_like(u)
    for r in roots:
        d = u - r
        q = cell * float(d @ d)
        if q == 0.0:
            return math.inf, glog
        mr = 1.0 / q + 1.0
        m *= mr
        glog += (-2.0 * cell * d / q**2) / mr
    return m, glog


def newton_solve(op: SpectralOperator, w: WeightField, nl: Nonlinearity, lam: float,
                 u0, tol: float = 1e-10, max_iter: int = 50,
                 deflate: Sequence[np.ndarray] = (), history: Optional[list] = None) -> BranchPoint:
    """Newton's method on A^{1/2} u - lam g f(u) = 0, optionally deflated.

    With ``deflate`` the residual is multiplied by prod (1/|u - r|^2 + 1)
    over the given roots (L2 norm with quadrature weight h^dim).
    """
    u = np.array(u0, dtype=float)
    cell = op.grid.cell
    guard = _guard(nl)
    for k in range(max_iter + 1):
        F = residual(op, w, nl, lam, u)
        rnorm = float(np.max(np.abs(F)))
        if history is not None:
            history.append(rnorm)
        if not np.isfinite(rnorm):
            raise NoConvergence("non-finite residual", lam, k)
        if rnorm <= tol:
            return _point(op, w, nl, lam, u, k)
        if k == max_iter:
            break
        J = stability_matrix(op, w, nl, lam, u)
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            try:
                step = linalg.solve(J, -F, assume_a="sym")
            except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
                raise SingularJacobian(f"singular Jacobian: {exc}", lam, k) from exc
        if deflate:
            m, glog = _deflation_gradient(u, deflate, cell)
            denom = 1.0 + float(glog @ step)
            if not np.isfinite(m) or denom == 0.0:
                raise NoConvergence("deflation breakdown", lam, k)
            step = step / denom
        # damp until the trial point stays where f is finite
        t = 1.0
        for _ in range(40):
            trial = u + t * step
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                finite = np.all(np.isfinite(nl.f(trial)))
            if finite and np.max(trial) < guard:
                break
            t *= 0.5
        else:
            raise NoConvergence("Newton step left the domain of f", lam, k)
        u = trial
        if np.max(np.abs(u)) > BLOWUP_R:
            raise NoConvergence("Newton iterate diverged", lam, k)
    raise NoConvergence("Newton max_iter reached", lam, max_iter)


def deflated_search(op: SpectralOperator, w: WeightField, nl: Nonlinearity, lam: float,
                    known: Sequence[np.ndarray] = (), starts: int = 20, seed: int = 0,
                    tol: float = 1e-10, amplitude: Optional[float] = None,
                    max_iter: int = 100) -> list:
    """Search for solutions other than ``known`` from seeded random starts.

    Starts are ``a * z * (1/2 + xi)`` with ``z`` the normalized solution of
    A^{1/2} z = g, ``a`` uniform on ``(0, amplitude)`` and ``xi`` uniform
    noise.  Every converged root is deflated for the remaining starts.
    Returns only new, mutually distinct roots.
    """
    rng = np.random.default_rng(seed)
    z = half_solve(op, w.values)
    z = z / np.max(z)
    if amplitude is None:
        amplitude = 3.0 if nl.kind == "R" else 0.95
    roots = [np.asarray(r, dtype=float) for r in known]
    found = []
    for _ in range(starts):
        a = rng.uniform(0.0, amplitude)
        u0 = a * z * (0.5 + rng.random(op.grid.size))
        if nl.kind == "S":
            u0 = np.minimum(u0, 0.99)
        try:
            pt = newton_solve(op, w, nl, lam, u0, tol=tol, max_iter=max_iter, deflate=roots)
        except NoConvergence:
            continue
        if any(np.max(np.abs(pt.u - r)) <= 10 * tol for r in roots):
            continue
        roots.append(pt.u)
        found.append(pt)
    return found


# continuation ----------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaPolicy:
    """How ``continue_branch`` chooses lambda values.

    ``grid`` solves at the listed values only (an empty grid gives an empty
    branch); ``adaptive`` steps from ``start`` with growth on success and
    halving on failure until the fold is bracketed.
    """
    kind: str = "adaptive"
    grid: tuple = ()
    start: float = 1e-3
    step: float = 0.05
    grow: float = 1.5
    max_step: float = 0.5
    max_points: int = 500


def _solve_at(op, w, nl, lam, prev: Optional[BranchPoint], tol, max_iter) -> BranchPoint:
    """Newton warm start from ``prev``; monotone iteration from ``prev`` as fallback.

    The Newton result is accepted only when it is semi-stable and lies above
    ``prev``; otherwise it may sit on the upper branch.
    """
    if prev is not None and prev.lam <= lam:
        try:
            pt = newton_solve(op, w, nl, lam, prev.u, tol=tol, max_iter=30)
            if pt.mu1 >= -1e-8 and np.all(pt.u >= prev.u - 1e-12):
                return pt
        except NoConvergence:
            pass
        return monotone_solve(op, w, nl, lam, tol, max_iter, u0=prev.u)
    return monotone_solve(op, w, nl, lam, tol, max_iter)


def _refine_bracket(op, w, nl, lo: BranchPoint, hi: float, width, tol, max_iter):
    while hi - lo.lam > width:
        mid = 0.5 * (lo.lam + hi)
        try:
            lo = monotone_solve(op, w, nl, mid, tol, max_iter, u0=lo.u)
        except NoConvergence:
            hi = mid
    return lo, hi


def continue_branch(op: SpectralOperator, w: WeightField, nl: Nonlinearity,
                    policy: LambdaPolicy = LambdaPolicy(), tol: float = 1e-3,
                    solver_tol: float = 1e-10, max_iter: int = 10_000) -> Branch:
    """Sweep lambda upward along the minimal branch.

    ``tol`` is the width of the final lambda* bracket.
    """
    points = []
    prev = None
    if policy.kind == "grid":
        hi = None
        for lam in sorted(policy.grid):
            try:
                prev = _solve_at(op, w, nl, lam, prev, solver_tol, max_iter)
            except NoConvergence:
                hi = lam
                break
            points.append(prev)
        if prev is None:
            return Branch(points, None)
        if hi is None:
            lam, step = prev.lam, max(prev.lam, policy.step)
            anchor = prev
            while True:
                try:
                    anchor = monotone_solve(op, w, nl, lam + step, solver_tol, max_iter, u0=anchor.u)
                    lam += step
                    step *= 2
                except NoConvergence:
                    hi = lam + step
                    break
            prev = anchor
        lo, hi = _refine_bracket(op, w, nl, prev, hi, tol, solver_tol, max_iter)
    elif policy.kind == "adaptive":
        lam, step, hi = policy.start, policy.step, math.inf
        prev = _solve_at(op, w, nl, lam, None, solver_tol, max_iter)
        points.append(prev)
        while hi - prev.lam > tol and len(points) < policy.max_points:
            target = min(prev.lam + step, 0.5 * (prev.lam + hi)) if math.isfinite(hi) else prev.lam + step
            try:
                pt = _solve_at(op, w, nl, target, prev, solver_tol, max_iter)
            except NoConvergence:
                hi = target
                step = 0.5 * (target - prev.lam)
                continue
            points.append(pt)
            prev = pt
            step = min(step * policy.grow, policy.max_step)
        lo = prev
    else:
        raise ValueError(f"unknown lambda policy {policy.kind!r}")
    branch = Branch(points, (lo.lam, hi), lo)
    branch.extremal_integral = extremal_integral(lo.u, nl, w)
    return branch


# extremal parameter -----------------------------------------------------------------

@dataclass(eq=False)
class LambdaStar:
    lo: float
    hi: float
    upper_bound: float
    lower_bound: float
    point: BranchPoint = field(repr=False)

    @property
    def bracket(self) -> tuple:
        return (self.lo, self.hi)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


def lambda_star_upper_bound(op: SpectralOperator, w: WeightField, nl: Nonlinearity) -> float:
    """sqrt(lambda_1) C_f sum(phi_1) / sum(g phi_1); inf when C_f diverges."""
    cf = nl.C_f
    if not math.isfinite(cf):
        return math.inf
    phi = op.phi1
    return math.sqrt(op.lambda1) * cf * float(phi.sum() / (w.values @ phi))


def lambda_star_lower_bound(op: SpectralOperator, w: WeightField, nl: Nonlinearity,
                            samples: int = 2000) -> float:
    """Largest t / sup f(t z) with A^{1/2} z = g: t z is then a supersolution."""
    Z = float(np.max(half_solve(op, w.values)))
    top = (1.0 - 1e-6) / Z if nl.kind == "S" else BLOWUP_R / Z
    t = np.geomspace(1e-4 * top, top, samples)
    with np.errstate(over="ignore"):
        lam = t / nl.f(t * Z)
    return float(np.max(lam))


def estimate_lambda_star(op: SpectralOperator, w: WeightField, nl: Nonlinearity,
                         tol: float = 1e-3, solver_tol: float = 1e-10,
                         max_iter: int = 10_000) -> LambdaStar:
    """Bisection on convergence of the monotone iteration.

    The lower end starts at the constructive lower bound, the upper end at
    the C_f bound when finite (doubling otherwise).
    """
    lower = lambda_star_lower_bound(op, w, nl)
    upper = lambda_star_upper_bound(op, w, nl)
    lo = monotone_solve(op, w, nl, lower, solver_tol, max_iter)
    if math.isfinite(upper):
        hi = upper
        try:
            monotone_solve(op, w, nl, hi, solver_tol, max_iter, u0=lo.u)
            raise NumericError("monotone iteration converged at the C_f upper bound")
        except NoConvergence:
            pass
    else:
        hi = 2.0 * lower
        for _ in range(60):
            try:
                lo = monotone_solve(op, w, nl, hi, solver_tol, max_iter, u0=lo.u)
            except NoConvergence:
                break
            hi *= 2.0
        else:
            raise NumericError("no failure found while doubling lambda")
    lo, hi = _refine_bracket(op, w, nl, lo, hi, tol, solver_tol, max_iter)
    return LambdaStar(lo.lam, hi, upper, lower, lo)


def extremal_integral(u: np.ndarray, nl: Nonlinearity, w: WeightField) -> float:
    """Midpoint sum of g f'(u) f(u)."""
    return float(w.grid.cell * np.sum(w.values * nl.f1(u) * nl.f(u)))


def extremal_estimate(branch: Branch, nl: Nonlinearity, w: WeightField):
    """(u*, integral of g f'(u*) f(u*)) taken at the lower end of the lambda* bracket."""
    if branch.u_star_est is None:
        raise ValueError("branch has no points")
    u = branch.u_star_est.u
    return u, extremal_integral(u, nl, w)


# existence construction ---------------------------------------------------------

@dataclass(eq=False)
class Construction:
    point: BranchPoint
    mu: float
    supersolution: np.ndarray = field(repr=False)
    chain: Optional[tuple] = field(default=None, repr=False)  # (u0, u1, u2, u3), class R only

    def chain_margins(self) -> tuple:
        """(min(u1 - u2), min(mu u0 - u1)); both >= 0 when the chain holds."""
        u0, u1, u2, _ = self.chain
        return float(np.min(u1 - u2)), float(np.min(self.mu * u0 - u1))


def lemma_exist_construct(op: SpectralOperator, w: WeightField, nl: Nonlinearity,
                          tau: np.ndarray, eps: float, tol: float = 1e-10,
                          max_iter: int = 10_000) -> Construction:
    """Solve A^{1/2} u = g (f(u) + eps/2) from a tau with A^{1/2} tau >= g (f(tau) + eps).

    Class S: mu tau is a supersolution and monotone iteration runs below it.
    Class R (log-convex): three damped half-solves u1, u2, u3 from u0 = tau,
    a solution w of the mu-problem below u2, then mu w as supersolution.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    tau = np.asarray(tau, dtype=float)
    g = w.values
    if np.min(tau) < 0:
        raise ValueError("tau must be nonnegative")
    if np.any(op.A_half @ tau < g * (nl.f(tau) + eps) - tol):
        raise ValueError("hypothesis A^{1/2} tau >= g (f(tau) + eps) fails")
    mu = find_scaling_mu(nl, eps)
    chain = None
    if nl.kind == "S":
        sup = mu * tau
    else:
        u0 = tau
        u1 = half_solve(op, mu * g * (nl.f(u0) + eps))
        u2 = half_solve(op, mu * g * (nl.f(u1) + eps))
        u3 = half_solve(op, mu * g * (nl.f(u2) + eps))
        chain = (u0, u1, u2, u3)
        if np.any(u2 > u1 + 1e-10) or np.any(u1 > mu * u0 + 1e-10):
            raise NumericError("chain u2 <= u1 <= mu u0 violated")
        if np.any(u3 > u2 + 1e-10) or np.min(u3) < -1e-12:
            raise NumericError("0 <= u3 <= u2 violated")
        wsol, _ = _iterate(op, w, nl, mu, eps, None, tol, max_iter)
        if np.any(wsol > u2 + 1e-10):
            raise NumericError("mu-problem solution above its supersolution u2")
        sup = mu * wsol
    lhs = op.A_half @ sup
    if np.any(lhs < g * (nl.f(sup) + 0.5 * eps) - tol):
        raise NumericError("scaled function is not a supersolution of the eps/2 problem")
    u, k = _iterate(op, w, nl, 1.0, 0.5 * eps, None, tol, max_iter)
    if np.any(u > sup + 1e-10):
        raise NumericError("solution exceeds its supersolution")
    return Construction(_point(op, w, nl, 1.0, u, k, shift=0.5 * eps), mu, sup, chain)


# energy estimate ---------------------------------------------------------------------

def energy_estimate_check(point: BranchPoint, nl: Nonlinearity, w: WeightField):
    """(lhs, rhs, holds) for sum g f(u) H(u) <= sum g f(u) f'(u)."""
    u = point.u
    cell = w.grid.cell
    fu = nl.f(u)
    lhs = float(cell * np.sum(w.values * fu * big_h(nl, u)))
    rhs = float(cell * np.sum(w.values * fu * nl.f1(u)))
    return lhs, rhs, lhs <= rhs * (1 + 1e-6)
