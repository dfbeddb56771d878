"""Minimal branches (lambda, sup u) for every preset on one grid.

    python scripts/branch_diagram.py --dim 1 --n 63 --out results/branches
"""
import argparse
from pathlib import Path

from fraceig.cli import write_csv, write_svg
from fraceig.discretize import build_grid, build_operator, build_weight
from fraceig.nonlinearity import make_preset
from fraceig.solve import LambdaPolicy, continue_branch, lambda_star_upper_bound

PRESETS = ("exp", "mems2", "mems1", "loglin", "power(3)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--n", type=int, default=63)
    ap.add_argument("--weight", default="one")
    ap.add_argument("--out", default="results/branches")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    op = build_operator(build_grid(args.dim, args.n))
    w = build_weight(args.weight, op.grid)
    summary = []
    for name in PRESETS:
        nl = make_preset(name)
        branch = continue_branch(op, w, nl, LambdaPolicy())
        rows = [(p.lam, p.sup_u, p.mu1) for p in branch.points]
        tag = name.replace("(", "").replace(")", "")
        write_csv(out / f"branch_{tag}.csv", ["lambda", "sup_u", "mu1"], rows)
        write_svg(out / f"branch_{tag}.svg", branch.lambdas, [r[1] for r in rows], "lambda", "sup u")
        lo, hi = branch.lambda_star_bracket
        bound = lambda_star_upper_bound(op, w, nl)
        summary.append((nl.label, lo, hi, bound, branch.points[-1].sup_u, branch.points[-1].mu1))
        print(f"{nl.label:10s} lambda* in [{lo:.6f}, {hi:.6f}]  C_f bound {bound:.4f}  "
              f"sup u* {branch.points[-1].sup_u:.4f}  mu1 at fold {branch.points[-1].mu1:.2e}")
    write_csv(out / "summary.csv", ["nonlinearity", "lambda_lo", "lambda_hi", "cf_bound", "sup_u_star", "mu1_star"],
              summary)


if __name__ == "__main__":
    main()
