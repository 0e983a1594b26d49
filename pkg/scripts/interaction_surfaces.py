"""Tidy CSV of ITX, MITP, IIX and MII over parameter grids of the X -> W -> Y model.

Two panels:
  sidepath        a = b and c vary, alpha fixed
  autodependency  c and alpha vary, a = b fixed

``--mode population`` evaluates the linear model exactly (seconds);
``--mode ensemble`` averages k-NN estimates over simulated replicas and
also covers the nonlinear variant.

    python scripts/interaction_surfaces.py --panel sidepath --mode population --out sidepath.csv
    python scripts/interaction_surfaces.py --panel autodependency --mode ensemble --model nonlinear \\
        --grid 5 --ensemble 10 -T 10000 --k 1 --out nonlinear_auto.csv
"""
from __future__ import annotations

import argparse
import math

import numpy as np

from causal_pathways import (
    EstimatorConfig,
    NodeRef,
    PopulationGaussian,
    implied_graph,
    interaction_measure,
    model_xwy,
    model_xwy_nonlinear,
    transfer_measure,
)
from causal_pathways.fileio import write_csv_rows
from causal_pathways.linear_effects import analytic_mii_triple, analytic_mitp_triple
from causal_pathways.simulate import ensemble_stats

SRC, TGT, MEDIATOR = NodeRef(0, 2), NodeRef(2, 0), 1
MEASURES = ("ITX", "MITP", "IIX", "MII")


def grid_points(panel: str, n: int, fixed: float):
    if panel == "sidepath":
        for ab in np.linspace(-0.8, 0.8, n):
            if abs(ab) < 1e-9:
                continue  # no sidepath, so IIX and MII are undefined
            for c in np.linspace(-0.8, 0.8, n):
                yield fixed, ab, ab, c
    else:
        for alpha in np.linspace(0.0, 0.9, n):
            for c in np.linspace(-0.8, 0.8, n):
                yield alpha, fixed, fixed, c


def measure_all(ds, g, cfg):
    out = {k: transfer_measure(ds, g, k, SRC, TGT, cfg).value for k in ("ITX", "MITP")}
    for k in ("IIX", "MII"):
        out[k] = interaction_measure(ds, g, k, SRC, TGT, MEDIATOR, cfg).value
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--panel", choices=("sidepath", "autodependency"), default="sidepath")
    p.add_argument("--mode", choices=("population", "ensemble"), default="population")
    p.add_argument("--model", choices=("linear", "nonlinear"), default="linear")
    p.add_argument("--grid", type=int, default=9, help="points per axis")
    p.add_argument("--fixed", type=float, default=0.5, help="alpha (sidepath panel) or a = b (autodependency panel)")
    p.add_argument("--ensemble", type=int, default=30)
    p.add_argument("-T", type=int, default=10000)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="surface.csv")
    args = p.parse_args(argv)
    if args.mode == "population" and args.model == "nonlinear":
        p.error("population mode needs the linear model")

    header = ["model", "panel", "alpha", "a", "b", "c"] + list(MEASURES)
    if args.mode == "ensemble":
        header += [f"{m}_sd" for m in MEASURES]
    if args.model == "linear":
        header += ["MITP_closed_form", "MII_closed_form"]
    rows = []
    # simulated series stay in model units, as in the ensemble self-checks
    cfg = EstimatorConfig(k=args.k, seed=args.seed, standardize=False)
    for alpha, a, b, c in grid_points(args.panel, args.grid, args.fixed):
        make = model_xwy if args.model == "linear" else model_xwy_nonlinear
        m = make(alpha, a, b, c)
        g = implied_graph(m)
        if args.mode == "population":
            vals = measure_all(PopulationGaussian(m), g, cfg)
            row = [vals[k] for k in MEASURES]
        else:
            stats = ensemble_stats(m, lambda ds: measure_all(ds, g, cfg), args.ensemble, args.T, args.seed)
            row = [stats[k][0] for k in MEASURES] + [stats[k][1] for k in MEASURES]
        if args.model == "linear":
            row += [analytic_mitp_triple(a, b, c, 1, 1, 1), analytic_mii_triple(a, b, c, 1, 1, 1)]
        rows.append([args.model, args.panel] + [f"{x:.4f}" for x in (alpha, a, b, c)]
                    + ["nan" if math.isnan(x) else repr(x) for x in row])
        print(f"alpha={alpha:.2f} a=b={a:.2f} c={c:.2f}: "
              + ", ".join(f"{k}={v:.4f}" for k, v in zip(MEASURES, row)))
    write_csv_rows(args.out, header, rows)
    print(f"{len(rows)} grid points -> {args.out}")


if __name__ == "__main__":
    main()
