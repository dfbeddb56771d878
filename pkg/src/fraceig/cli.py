"""Command-line front end.

    fraceig <subcommand> --config <path> [--out <dir>] [--seed <int>]

Exit status: 0 success, 1 configuration or output error, 2 solver failure,
3 selftest failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import acceptance
from .config import ConfigError, RunConfig, load_config
from .discretize import (
    SolverError,
    build_grid,
    build_operator,
    build_weight,
    dirichlet_energy,
    extend_harmonic,
    half_apply,
    neumann_trace,
)
from .nonlinearity import (
    GRID_POINTS,
    T_MAX,
    GateError,
    NumericError,
    criticality_ratio,
    find_scaling_mu,
    find_shift_k,
    make_preset,
    scaling_residual,
    shift_residual,
)
from .solve import (
    LambdaPolicy,
    NoConvergence,
    continue_branch,
    estimate_lambda_star,
    extremal_estimate,
    monotone_solve,
)
from .verify import boundary_energy, fit_decay_rate, pohozaev_residual, uniqueness_certificate

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SELFTEST = 0, 1, 2, 3

SUBCOMMANDS = ("branch", "lambda-star", "extremal", "uniqueness", "identities", "props", "selftest")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header, rows, append: bool = False) -> None:
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        if new:
            out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def write_svg(path: Path, xs, ys, xlabel: str, ylabel: str) -> None:
    """Single polyline in a 400x300 viewport."""
    W, H, pad = 400, 300, 40
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    def scale(v, lo, hi, a, b):
        return a + (b - a) * (v - lo) / (hi - lo if hi > lo else 1.0)
    px = scale(xs, xs.min(initial=0), xs.max(initial=1), pad, W - pad)
    py = scale(ys, ys.min(initial=0), ys.max(initial=1), H - pad, pad)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    path.write_text(
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}">\n'
        f'<polyline fill="none" stroke="black" points="{pts}"/>\n'
        f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle">{xlabel}</text>\n'
        f'<text x="12" y="{H / 2}" transform="rotate(-90 12 {H / 2})" text-anchor="middle">{ylabel}</text>\n'
        "</svg>\n"
    )


def _problem(cfg: RunConfig):
    op = build_operator(build_grid(cfg.dim, cfg.n))
    return op, build_weight(cfg.weight, op.grid), make_preset(cfg.nonlinearity)


def _policy(cfg: RunConfig) -> LambdaPolicy:
    return LambdaPolicy(kind=cfg.policy, grid=cfg.lambda_grid, start=cfg.lambda_start, step=cfg.lambda_step)


def cmd_branch(cfg: RunConfig, out: Path) -> int:
    op, w, nl = _problem(cfg)
    branch = continue_branch(op, w, nl, _policy(cfg), cfg.bracket_tol, cfg.tol, cfg.max_iter)
    rows = [(p.lam, p.sup_u, p.mu1, p.iterations, p.residual) for p in branch.points]
    write_csv(out / "branch.csv", ["lambda", "sup_u", "mu1", "iterations", "residual"], rows)
    if cfg.svg and rows:
        write_svg(out / "branch.svg", branch.lambdas, [p.sup_u for p in branch.points], "lambda", "sup u")
    if branch.lambda_star_bracket is not None:
        lo, hi = branch.lambda_star_bracket
        print(f"points = {len(rows)}\nlambda_star_bracket = {fmt(lo)} {fmt(hi)}")
    else:
        print("points = 0")
    return EXIT_OK


def cmd_lambda_star(cfg: RunConfig, out: Path) -> int:
    op, w, nl = _problem(cfg)
    est = estimate_lambda_star(op, w, nl, cfg.bracket_tol, cfg.tol, cfg.max_iter)
    print(f"lambda_lo = {fmt(est.lo)}\nlambda_hi = {fmt(est.hi)}\n"
          f"upper_bound = {fmt(est.upper_bound)}\nlower_bound = {fmt(est.lower_bound)}")
    write_csv(out / "summary.csv",
              ["dim", "n", "nonlinearity", "weight", "lambda_lo", "lambda_hi", "upper_bound", "lower_bound"],
              [(cfg.dim, cfg.n, nl.label, w.name, est.lo, est.hi, est.upper_bound, est.lower_bound)],
              append=True)
    return EXIT_OK


def cmd_extremal(cfg: RunConfig, out: Path) -> int:
    op, w, nl = _problem(cfg)
    branch = continue_branch(op, w, nl, replace(_policy(cfg), kind="adaptive"),
                             cfg.bracket_tol, cfg.tol, cfg.max_iter)
    u, integral = extremal_estimate(branch, nl, w)
    x = op.grid.x
    header = [f"x{i + 1}" for i in range(cfg.dim)] + ["u_star", "g_fprime_f"]
    density = w.values * nl.f1(u) * nl.f(u)
    write_csv(out / "u_star.csv", header, [(*x[i], u[i], density[i]) for i in range(u.size)])
    lo, hi = branch.lambda_star_bracket
    print(f"lambda_star_bracket = {fmt(lo)} {fmt(hi)}\nextremal_integral = {fmt(integral)}")
    return EXIT_OK


def cmd_uniqueness(cfg: RunConfig, out: Path) -> int:
    if cfg.dim != 2:
        raise ConfigError("uniqueness needs dim = 2")
    op, w, nl = _problem(cfg)
    est = estimate_lambda_star(op, w, nl, cfg.bracket_tol, cfg.tol, cfg.max_iter)
    pt = monotone_solve(op, w, nl, cfg.lambda_fraction * est.mid, cfg.tol, cfg.max_iter)
    rep = uniqueness_certificate(pt, nl, w, op, probe=True, seed=cfg.seed, starts=cfg.starts)
    items = [("nonlinearity", nl.label), ("weight", w.name), ("lambda_star_mid", est.mid)]
    items += list(rep.as_dict().items())
    write_csv(out / "report.csv", ["key", "value"], items)
    for k, v in items:
        print(f"{k} = {fmt(v)}")
    return EXIT_OK


def cmd_identities(cfg: RunConfig, out: Path) -> int:
    levels = [(cfg.n, cfg.m), (2 * cfg.n + 1, 2 * cfg.m)]
    trace_rows, poho_rows = [], []
    energy_rows = []
    for level, (n, m) in enumerate(levels):
        op = build_operator(build_grid(cfg.dim, n))
        s = math.sqrt(op.lambda1)
        R = cfg.R if math.isfinite(cfg.R) else 6 / s
        u = op.phi1 + 0.3 * op.phi(1)
        field_ = extend_harmonic(op, u, R, m)
        ref = half_apply(op, u)
        err = np.linalg.norm(neumann_trace(field_) - ref) / np.linalg.norm(ref)
        ground = extend_harmonic(op, op.phi1, R, m)
        energy = dirichlet_energy(op, ground) / op.grid.cell
        trace_rows.append((level, n, m, R, err, s, energy))
        if cfg.dim == 2:
            t = pohozaev_residual(op.grid, ground)
            poho_rows.append((level, n, m, R, *t.terms, t.residual, t.relative))
            if level == 0:
                Rs = np.linspace(2 / s, min(4.5 / s, R), 12)
                E = [boundary_energy(ground, r) for r in Rs]
                energy_rows = list(zip(Rs, E))
                print(f"decay_rate = {fmt(fit_decay_rate(Rs, E))}\ntwo_sqrt_lambda1 = {fmt(2 * s)}")
    write_csv(out / "trace.csv",
              ["level", "n", "m", "R", "trace_rel_error", "sqrt_lambda1", "ground_energy"], trace_rows)
    if cfg.dim == 2:
        write_csv(out / "pohozaev.csv",
                  ["level", "n", "m", "R", "lateral", "bottom", "bulk", "top", "residual", "relative"],
                  poho_rows)
        write_csv(out / "boundary_energy.csv", ["R", "E"], energy_rows)
        for row in poho_rows:
            print(f"pohozaev level {row[0]}: relative residual = {fmt(row[-1])}")
    else:
        print("pohozaev: skipped (identity needs dim = 2)")
    for row in trace_rows:
        print(f"trace level {row[0]}: relative error = {fmt(row[4])}")
    return EXIT_OK


def _props_rows(nl, eps):
    rows = []
    t_r = np.linspace(0.0, T_MAX, GRID_POINTS)
    for lam, delta in [(0.5, 1.0), (0.5, 3.0)]:
        inputs = f"lam={lam:g} delta={delta:g}"
        try:
            k = find_shift_k(nl, lam, delta)
        except GateError as exc:
            rows.append(("shift_k", nl.label, inputs, math.nan, math.nan, f"refused: {_gate_reason(exc)}"))
            continue
        worst = float(np.max(shift_residual(nl, lam, delta, k, t_r)))
        rows.append(("shift_k", nl.label, inputs, k, -worst, "ok"))
    try:
        mu = find_scaling_mu(nl, eps)
        t = t_r if nl.kind == "R" else np.linspace(0.0, mu, GRID_POINTS)
        low = float(np.min(scaling_residual(nl, mu, eps, t)))
        rows.append(("scaling_mu", nl.label, f"eps={eps:g}", mu, low, "ok"))
    except GateError as exc:
        rows.append(("scaling_mu", nl.label, f"eps={eps:g}", math.nan, math.nan, f"refused: {_gate_reason(exc)}"))
    if nl.kind == "R":
        alpha, trend = criticality_ratio(nl)
        rows.append(("criticality_ratio", nl.label, "t_max=10", alpha, math.nan, trend))
    return rows


def _gate_reason(exc) -> str:
    return "not log-convex" if "log-convex" in str(exc) else str(exc)


def cmd_props(cfg: RunConfig, out: Path) -> int:
    nl = make_preset(cfg.nonlinearity)
    eps = cfg.eps if math.isfinite(cfg.eps) else (0.1 if nl.kind == "R" else 1.0)
    rows = _props_rows(nl, eps)
    write_csv(out / "props.csv", ["check", "nonlinearity", "inputs", "value", "min_residual", "status"], rows)
    for r in rows:
        print(", ".join(fmt(v) for v in r))
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, out: Path) -> int:
    results = acceptance.run_all(cfg.seed)
    rows = [(r.number, c.label, c.value, c.passed) for r in results for c in r.checks]
    write_csv(out / "selftest.csv", ["criterion", "check", "value", "passed"], rows)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


COMMANDS = {
    "branch": cmd_branch,
    "lambda-star": cmd_lambda_star,
    "extremal": cmd_extremal,
    "uniqueness": cmd_uniqueness,
    "identities": cmd_identities,
    "props": cmd_props,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraceig", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "selftest", help="key = value config file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    return parser


def run(command: str, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, NumericError, SolverError, GateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg = replace(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg = replace(cfg, out=args.out)
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
