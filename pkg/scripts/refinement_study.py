"""Grid refinement of the trace error, the Pohozaev residual and lambda*.

    python scripts/refinement_study.py --out results/refinement
"""
import argparse
import math
from pathlib import Path

import numpy as np

from fraceig.cli import write_csv
from fraceig.discretize import build_grid, build_operator, build_weight, extend_harmonic, half_apply, neumann_trace
from fraceig.nonlinearity import make_preset
from fraceig.solve import estimate_lambda_star
from fraceig.verify import pohozaev_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/refinement")
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for dim, n0, m0 in [(1, 15, 32), (2, 7, 24)]:
        prev = None
        for level in range(args.levels):
            n, m = (n0 + 1) * 2**level - 1, m0 * 2**level
            op = build_operator(build_grid(dim, n))
            s = math.sqrt(op.lambda1)
            u = op.phi1 + 0.3 * op.phi(1)
            ref = half_apply(op, u)
            f = extend_harmonic(op, u, 6 / s, m)
            err = np.linalg.norm(neumann_trace(f) - ref) / np.linalg.norm(ref)
            poho = pohozaev_residual(op.grid, extend_harmonic(op, op.phi1, 6 / s, m)).relative if dim == 2 else math.nan
            lam = estimate_lambda_star(op, build_weight("one", op.grid), make_preset("exp")).mid
            order = math.log2(prev / err) if prev else math.nan
            prev = err
            rows.append((dim, n, m, err, order, poho, lam))
            print(f"dim={dim} n={n:3d} m={m:4d}  trace err {err:.3e} (order {order:.2f})  "
                  f"pohozaev {poho:.3e}  lambda* {lam:.6f}")
    write_csv(out / "refinement.csv",
              ["dim", "n", "m", "trace_rel_error", "observed_order", "pohozaev_relative", "lambda_star_mid"], rows)


if __name__ == "__main__":
    main()
