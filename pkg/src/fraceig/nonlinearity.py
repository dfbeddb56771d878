"""Nonlinearities of class (R) and (S) and the scalar inequalities built on them.

A nonlinearity ``f`` is smooth, increasing and convex with ``f(0) = 1``.
Class R is superlinear at infinity; class S blows up as ``t -> 1``.
Everything here is a pure function of an immutable :class:`Nonlinearity`.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

Scalar = Callable[[np.ndarray], np.ndarray]

# grid used to certify "for all t" claims
GRID_POINTS = 10_000
T_MAX = 50.0


class NumericError(RuntimeError):
    """A quadrature or verification step failed numerically."""


class GateError(ValueError):
    """Operation refused because the nonlinearity is outside its class."""


def _errstate():
    return np.errstate(over="ignore", divide="ignore", invalid="ignore")


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    kind: str  # "R" or "S"
    f: Scalar
    f1: Scalar
    f2: Scalar
    log_convex: bool
    F_exact: Optional[Scalar] = None
    beta: Optional[Scalar] = None
    H_exact: Optional[Scalar] = None
    log_f: Optional[Scalar] = None
    log_F: Optional[Scalar] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("R", "S"):
            raise ValueError(f"kind must be 'R' or 'S', got {self.kind!r}")

    @property
    def a_f(self) -> float:
        return math.inf if self.kind == "R" else 1.0

    @property
    def label(self) -> str:
        if self.params:
            args = ",".join(f"{v:g}" for v in self.params.values())
            return f"{self.name}({args})"
        return self.name

    def F(self, t):
        """Antiderivative with F(0) = 0; quadrature when no closed form."""
        t = np.asarray(t, dtype=float)
        if self.F_exact is not None:
            with _errstate():
                return self.F_exact(t)
        quad = np.vectorize(lambda s: integrate.quad(self.f, 0.0, s, epsabs=0, epsrel=1e-12)[0])
        return quad(t)

    def logf(self, t):
        t = np.asarray(t, dtype=float)
        with _errstate():
            return self.log_f(t) if self.log_f is not None else np.log(self.f(t))

    def logF(self, t):
        t = np.asarray(t, dtype=float)
        with _errstate():
            return self.log_F(t) if self.log_F is not None else np.log(self.F(t))

    @cached_property
    def C_f(self) -> float:
        return cf_constant(self)

    def in_domain(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "S":
            return t < 1.0
        return np.isfinite(t)


def _singular(power):
    # (1 - t)^(-power), +inf at and beyond the singularity
    def g(t):
        t = np.asarray(t, dtype=float)
        with _errstate():
            s = 1.0 - t
            return np.where(s > 0, np.power(np.where(s > 0, s, 1.0), -power), np.inf)
    return g


def _exp() -> Nonlinearity:
    return Nonlinearity(
        name="exp", kind="R", f=np.exp, f1=np.exp, f2=np.exp, log_convex=True,
        F_exact=lambda t: np.expm1(t),
        beta=lambda t: np.asarray(t, dtype=float),
        H_exact=lambda t: 0.5 * np.expm1(t) ** 2,
        log_f=lambda t: np.asarray(t, dtype=float),
        log_F=lambda t: t + np.log(-np.expm1(-t)),
    )


def _mems(p: int) -> Nonlinearity:
    # f = (1-t)^-p for p = 1, 2
    f = _singular(p)
    f1 = lambda t: p * _singular(p + 1)(t)
    f2 = lambda t: p * (p + 1) * _singular(p + 2)(t)
    if p == 2:
        F = lambda t: _singular(1)(t) - 1.0
        # integral of 6 s^-6 - 6 s^-4
        H = lambda t: 1.2 * (_singular(5)(t) - 1.0) - 2.0 * (_singular(3)(t) - 1.0)
    else:
        F = lambda t: np.where(t < 1, -np.log1p(-np.minimum(t, 1.0)), np.inf)
        # integral of 2 s^-4 - 2 s^-3
        H = lambda t: (2.0 / 3.0) * (_singular(3)(t) - 1.0) - (_singular(2)(t) - 1.0)
    beta = lambda t: -p * np.log1p(-np.asarray(t, dtype=float))
    return Nonlinearity(
        name=f"mems{p}", kind="S", f=f, f1=f1, f2=f2, log_convex=True,
        F_exact=F, beta=beta, H_exact=H,
    )


def _loglin() -> Nonlinearity:
    def f(t):
        s = 1.0 + np.asarray(t, dtype=float)
        return s * np.log(s) + 1.0

    def F(t):
        t = np.asarray(t, dtype=float)
        s = 1.0 + t
        return 0.5 * s**2 * np.log(s) - 0.25 * (s**2 - 1.0) + t

    # log f is concave here: (log f)'' = -(L^2 + L + t/(1+t)) / f^2
    return Nonlinearity(
        name="loglin", kind="R", f=f,
        f1=lambda t: np.log1p(t) + 1.0,
        f2=lambda t: 1.0 / (1.0 + np.asarray(t, dtype=float)),
        log_convex=False, F_exact=F,
    )


def _power(p: float) -> Nonlinearity:
    if not p > 1:
        raise ValueError(f"power preset needs p > 1, got {p}")

    def H(t):
        s = 1.0 + np.asarray(t, dtype=float)
        return p * (p - 1) * ((s ** (2 * p - 1) - 1) / (2 * p - 1) - (s ** (p - 1) - 1) / (p - 1))

    return Nonlinearity(
        name="power", kind="R",
        f=lambda t: (1.0 + np.asarray(t, dtype=float)) ** p,
        f1=lambda t: p * (1.0 + np.asarray(t, dtype=float)) ** (p - 1),
        f2=lambda t: p * (p - 1) * (1.0 + np.asarray(t, dtype=float)) ** (p - 2),
        log_convex=False,
        F_exact=lambda t: ((1.0 + np.asarray(t, dtype=float)) ** (p + 1) - 1.0) / (p + 1),
        H_exact=H,
        log_f=lambda t: p * np.log1p(t),
        params={"p": p},
    )


PRESETS = ("exp", "mems2", "mems1", "loglin", "power")

_PRESET_RE = re.compile(r"^\s*([a-z0-9]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def make_preset(name: str, **params) -> Nonlinearity:
    """Build a preset nonlinearity.

    ``name`` is one of ``exp, mems2, mems1, loglin, power``; the power
    family takes ``p`` either as a keyword or inline, e.g. ``"power(3)"``.
    """
    m = _PRESET_RE.match(name)
    if m is None:
        raise ValueError(f"unknown nonlinearity preset {name!r}")
    base, arg = m.group(1), m.group(2)
    if arg:
        params.setdefault("p", float(arg))
    if base == "exp":
        return _exp()
    if base == "mems2":
        return _mems(2)
    if base == "mems1":
        return _mems(1)
    if base == "loglin":
        return _loglin()
    if base == "power":
        if "p" not in params:
            raise ValueError("power preset requires p")
        return _power(float(params["p"]))
    raise ValueError(f"unknown nonlinearity preset {name!r}")


def _quad(fun, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fun, a, b, epsabs=1e-300, epsrel=1e-11, limit=500)
        except integrate.IntegrationWarning as exc:
            raise NumericError(f"quadrature on [{a:g}, {b:g}] failed: {exc}") from exc
    return val, err


def cf_constant(nl: Nonlinearity, decades: int = 15) -> float:
    """Integral of 1/f over the domain of ``f``; ``math.inf`` when it diverges.

    For class R the tail is integrated decade by decade. Convergence is
    declared when the decade contributions shrink at a steady ratio below
    one, in which case a geometric tail is added.
    """
    def recip(t):
        with _errstate():
            return float(1.0 / nl.f(t))

    if nl.kind == "S":
        return _quad(recip, 0.0, 1.0)[0]

    total = _quad(recip, 0.0, 1.0)[0]
    pieces = []
    for k in range(decades):
        pieces.append(_quad(recip, 10.0**k, 10.0 ** (k + 1))[0])
    total += sum(pieces)
    last, prev, prev2 = pieces[-1], pieces[-2], pieces[-3]
    if last == 0.0 or prev == 0.0:
        return total
    r_last, r_prev = last / prev, prev / prev2
    if r_last < 0.99 and r_last <= r_prev + 1e-3:
        return total + last * r_last / (1.0 - r_last)
    return math.inf


def _r_grid(t_max: float, n: int = GRID_POINTS) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-6, t_max, n - 1)])


def _require_log_convex_r(nl: Nonlinearity, what: str):
    if nl.kind != "R":
        raise GateError(f"{what} needs a class R nonlinearity, {nl.label} is class {nl.kind}")
    if not nl.log_convex:
        raise GateError(f"{what} refused: {nl.label} is not log-convex")


def shift_residual(nl, lam, delta, k, t):
    """(1+delta) f(t) - f(t/lam) - k; nonpositive where the shift inequality holds."""
    with _errstate():
        return (1.0 + delta) * nl.f(t) - nl.f(t / lam) - k


def find_shift_k(nl: Nonlinearity, lam: float, delta: float, t_max: float = T_MAX) -> float:
    """Smallest k >= 0 with f(t/lam) + k >= (1+delta) f(t) for all t >= 0."""
    _require_log_convex_r(nl, "find_shift_k")
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    if delta <= 0:
        raise ValueError("delta must be positive")

    t = _r_grid(t_max)
    gap = shift_residual(nl, lam, delta, 0.0, t)
    i = int(np.nanargmax(gap))
    k = float(gap[i])
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda s: -float(shift_residual(nl, lam, delta, 0.0, s)),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-12},
        )
        k = max(k, -float(res.fun))
    k = max(k, 0.0)

    resid = shift_residual(nl, lam, delta, k, t)
    with _errstate():
        scale = 1.0 + np.abs(nl.f(t))
    if np.any(resid > 1e-12 * scale):
        raise NumericError("shift inequality fails on the verification grid")
    # tail: log f(t/lam) - log f(t) must exceed log(1+delta) and keep growing
    tail = np.geomspace(t_max, 10 * t_max, 64)
    gain = nl.logf(tail / lam) - nl.logf(tail)
    if not (np.all(np.diff(gain) >= -1e-12) and gain[0] > math.log1p(delta)):
        raise NumericError("asymptotic dominance check failed for find_shift_k")
    return k


def scaling_residual(nl: Nonlinearity, mu: float, eps: float, t) -> np.ndarray:
    """Class-appropriate residual of the scaling inequality; >= 0 where it holds.

    R: mu^2 (f(t/mu) + eps) - f(t) - eps/2.  S: mu (f(t/mu) + eps) - f(t) - eps/2.
    """
    power = 2 if nl.kind == "R" else 1
    with _errstate():
        return mu**power * (nl.f(t / mu) + eps) - nl.f(t) - 0.5 * eps


def _scaling_grid(nl, mu, t_max):
    if nl.kind == "R":
        return _r_grid(t_max)
    return np.linspace(0.0, mu, GRID_POINTS)


def _scaling_ok(nl, mu, eps, t_max) -> bool:
    t = _scaling_grid(nl, mu, t_max)
    r = scaling_residual(nl, mu, eps, t)
    if not np.all(r >= 0):
        return False
    if nl.kind == "R":
        tail = np.geomspace(t_max, 10 * t_max, 64)
        gain = 2 * math.log(mu) + nl.logf(tail / mu) - nl.logf(tail)
        return bool(gain[0] > 0 and np.all(np.diff(gain) >= -1e-12))
    return True


def find_scaling_mu(nl: Nonlinearity, eps: float, t_max: float = T_MAX,
                    iterations: int = 40) -> float:
    """A mu in (0, 1) satisfying the scaling inequality of the nonlinearity's class.

    Bisection on (0.5, 1) locates the lower edge of the passing set; the
    midpoint between that edge and 1 is returned.
    """
    if nl.kind == "R":
        _require_log_convex_r(nl, "find_scaling_mu")
    if eps <= 0:
        raise ValueError("eps must be positive")
    lo, hi = 0.5, 1.0
    if _scaling_ok(nl, lo, eps, t_max):
        hi = lo
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if _scaling_ok(nl, mid, eps, t_max):
                hi = mid
            else:
                lo = mid
        if hi >= 1.0 or not _scaling_ok(nl, hi, eps, t_max):
            raise NumericError(f"no mu above 0.5 found for eps={eps:g}")
    mu = 0.5 * (hi + 1.0)
    return mu if _scaling_ok(nl, mu, eps, t_max) else hi


def ratio(nl: Nonlinearity, t) -> np.ndarray:
    """F/(t f) for class R, f/F for class S."""
    t = np.asarray(t, dtype=float)
    if nl.kind == "R":
        return np.exp(nl.logF(t) - np.log(t) - nl.logf(t))
    with _errstate():
        return nl.f(t) / nl.F(t)


def criticality_ratio(nl: Nonlinearity, t_max: float = 10.0, samples: int = 1000):
    """Tail estimate of the criticality ratio and its trend.

    Returns ``(alpha_est, trend)`` where ``alpha_est`` is the largest ratio
    among the last ten samples and ``trend`` is one of ``"decreasing"``,
    ``"increasing"``, ``"flat"``.
    """
    if nl.kind == "R":
        t = np.geomspace(t_max / 1e3, t_max, samples)
    else:
        if not 0 < t_max < 1:
            raise ValueError("class S ratio needs 0 < t_max < 1")
        t = 1.0 - np.geomspace(1.0, 1.0 - t_max, samples)[1:]
    r = ratio(nl, t)
    tail = r[-10:]
    alpha = float(np.max(tail))
    change = (tail[-1] - tail[0]) / max(abs(tail[0]), 1e-300)
    if change < -1e-9:
        trend = "decreasing"
    elif change > 1e-9:
        trend = "increasing"
    else:
        trend = "flat"
    return alpha, trend


def big_h(nl: Nonlinearity, t):
    """H(t) = int_0^t f''(s) (f(s) - 1) ds."""
    t = np.asarray(t, dtype=float)
    if np.any(~nl.in_domain(t)):
        raise ValueError(f"t outside the domain of {nl.label}")
    if nl.H_exact is not None:
        with _errstate():
            return nl.H_exact(t)
    integrand = lambda s: float(nl.f2(s) * (nl.f(s) - 1.0))
    return np.vectorize(lambda s: integrate.quad(integrand, 0.0, s, epsrel=1e-12)[0])(t)


def check_invariants(nl: Nonlinearity, t_max: float = T_MAX) -> list[str]:
    """Return the list of violated class invariants (empty when all hold)."""
    problems = []
    if float(nl.f(0.0)) != 1.0:
        problems.append("f(0) != 1")
    if nl.kind == "R":
        t = np.linspace(0.0, t_max, GRID_POINTS)
    else:
        t = np.linspace(0.0, 1.0 - 1e-3, GRID_POINTS)
    with _errstate():
        fv, f1v, f2v = nl.f(t), nl.f1(t), nl.f2(t)
    if np.any(f1v < 0) or np.any(f2v < 0):
        problems.append("f' or f'' negative")
    d1, d2 = np.diff(fv), np.diff(fv, 2)
    if np.any(d1 < -1e-10) or np.any(d2 < -1e-10 * np.maximum(1.0, np.abs(fv[1:-1]))):
        problems.append("f not increasing/convex on grid")
    if nl.kind == "R":
        s = np.array([10.0, 100.0, 1000.0])
        lr = nl.logf(s) - np.log(s)
        if not np.all(np.diff(lr) > 0):
            problems.append("f(t)/t not increasing at 10, 100, 1000")
    else:
        s = 1.0 - 10.0 ** -np.arange(1, 7)
        v = nl.f(s)
        if not (np.all(np.diff(v) > 0) and v[-1] > 1e5):
            problems.append("f does not blow up at 1")
    if nl.log_convex:
        lg = nl.logf(t)
        if np.any(np.diff(lg, 2) < -1e-10):
            problems.append("log f not convex on grid")
    sample = t[:: GRID_POINTS // 20][1:]
    quad = np.array([integrate.quad(nl.f, 0.0, s, epsrel=1e-12)[0] for s in sample])
    if np.any(np.abs(nl.F(sample) - quad) > 1e-8 * np.abs(quad)):
        problems.append("F disagrees with quadrature")
    return problems
