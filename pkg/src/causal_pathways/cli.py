"""Command line entry point: ``causal-pathways <subcommand> [flags]``.

Exit codes: 0 success, 2 usage error, 3 data/model error, 4 validation failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import DataError, load_csv, save_csv
from .discovery import DiscoveryConfig, DiscoveryError, build_graph
from .estimators import EstimatorConfig, EstimatorError
from .fileio import FormatError, atomic_write, read_key_values, write_csv_rows
from .linear_effects import EffectError, causal_effect, mediated_causal_effect
from .measures import (
    INTERACTION_KINDS,
    TRANSFER_KINDS,
    MeasureError,
    MeasureResult,
    interaction_measure,
    lag_function,
    node_name,
    write_results,
)
from .netmetrics import cib_table, write_cib_table
from .simulate import (
    ModelError,
    implied_graph,
    model_four_station,
    model_xwy,
    model_xwy_nonlinear,
    read_model,
    simulate,
    write_model,
)
from .tsgraph import (
    GraphError,
    NodeRef,
    NoCausalPath,
    causal_paths,
    condition_set,
    read_graph,
    sidepath_neighbors,
    write_graph,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VALIDATION = 0, 2, 3, 4
BUILTIN_MODELS = ("xwy", "xwy-nonlinear", "four-station")
LINEAR_KINDS = ("CE", "MCE")


class UsageError(Exception):
    pass


def _parse_lags(text: str | None, tau_max: int) -> list:
    if text is None:
        return list(range(1, tau_max + 1))
    lags = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            lags.extend(range(int(lo), int(hi) + 1))
        else:
            lags.append(int(part))
    if any(l < 0 for l in lags):
        raise UsageError("lags must be >= 0")
    return lags


def _write_manifest(out: Path, args) -> None:
    lines = [f"{k} = {v}" for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None]
    atomic_write(out / "manifest.txt", "\n".join(lines) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} needs " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _load(args):
    ds = load_csv(args.data)
    g = read_graph(args.graph, names=ds.names, tau_max=args.tau_max) if args.graph else None
    return ds, g


def _var(ds, name):
    try:
        return ds.index(name)
    except DataError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    if args.T < 1:
        raise UsageError("-T must be >= 1")
    if args.model:
        m = read_model(args.model)
        label = str(args.model)
    else:
        name = args.builtin or "xwy"
        if name not in BUILTIN_MODELS:
            raise UsageError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
        if name == "four-station":
            m = model_four_station()
        else:
            make = model_xwy if name == "xwy" else model_xwy_nonlinear
            m = make(args.alpha, args.a, args.b, args.c, (args.sx, args.sw, args.sy))
        label = name
    if args.ensemble < 1:
        raise UsageError("--ensemble must be >= 1")
    out = _out_dir(args)
    if args.ensemble == 1:
        ds = simulate(m, args.T, seed=args.seed, burn_in=args.burn_in)
        save_csv(ds, out / "data.csv")
    else:
        # replica i uses the same seed stream as ensemble_stats
        for i in range(args.ensemble):
            ds = simulate(m, args.T, seed=[args.seed, i], burn_in=args.burn_in)
            save_csv(ds, out / f"data_{i:03d}.csv")
    write_graph(implied_graph(m, tau_max=args.tau_max), out / "graph.txt")
    write_model(m, out / "model.txt")
    _write_manifest(out, args)
    print(f"simulated {label}: {args.ensemble} x T={ds.T}, N={ds.N} -> {out}")
    return EXIT_OK


def cmd_discover(args) -> int:
    _require(args, "data")
    ds = load_csv(args.data)
    cfg = DiscoveryConfig(
        tau_max=args.tau_max or 4,
        threshold_nats=args.threshold,
        estimator=EstimatorConfig(k=args.k or 100, seed=args.seed),
    )
    g, result = build_graph(ds, cfg)
    out = _out_dir(args)
    write_graph(g, out / "graph.txt")
    result.write_report(out / "discovery_report.csv", ds.names)
    _write_manifest(out, args)
    print(f"{len(g.directed)} directed and {len(g.contemporaneous_solid)} contemporaneous links "
          f"-> {out / 'graph.txt'}")
    return EXIT_OK


def _linear_rows(ds, g, kind, source_var, target_var, lags, mediators):
    rows = []
    for lag in lags:
        src, tgt = NodeRef(source_var, lag), NodeRef(target_var, 0)
        try:
            if kind == "CE":
                r = causal_effect(ds, g, src, tgt)
            else:
                r = mediated_causal_effect(ds, g, src, tgt, mediators)
            rows.append(MeasureResult("linear_" + kind, src, tgt, r.value, tuple(r.regressors[1:]),
                                      r.n_samples, mediators=r.mediators))
        except (EffectError, GraphError) as exc:
            rows.append(MeasureResult("linear_" + kind, src, tgt, float("nan"), (), 0, note=str(exc)))
    return rows


def cmd_measure(args) -> int:
    _require(args, "data", "graph", "kind", "source", "target")
    ds, g = _load(args)
    kind = args.kind.upper()
    src_var, tgt_var = _var(ds, args.source), _var(ds, args.target)
    lags = _parse_lags(args.lag, g.tau_max)
    mediators = [_var(ds, m) for m in args.mediator.split(",")] if args.mediator else None
    cfg = EstimatorConfig(k=args.k or 10, seed=args.seed, bootstrap_count=args.bootstrap)
    if kind in TRANSFER_KINDS:
        results = lag_function(ds, g, kind, src_var, tgt_var, lags, cfg)
    elif kind in INTERACTION_KINDS:
        if not mediators:
            raise UsageError(f"{kind} needs --mediator")
        results = []
        for lag in lags:
            src, tgt = NodeRef(src_var, lag), NodeRef(tgt_var, 0)
            try:
                results.append(interaction_measure(ds, g, kind, src, tgt, mediators, cfg))
            except (MeasureError, GraphError) as exc:
                results.append(MeasureResult(kind, src, tgt, float("nan"), (), 0, note=str(exc)))
    elif kind in LINEAR_KINDS:
        if kind == "MCE" and not mediators:
            raise UsageError("MCE needs --mediator")
        results = _linear_rows(ds, g, kind, src_var, tgt_var, lags, mediators)
    else:
        raise UsageError(f"unknown kind {args.kind!r}")
    out = _out_dir(args)
    write_results(out / "measures.csv", results, ds.names)
    _write_manifest(out, args)
    for r in results:
        shown = r.note if r.note and r.value != r.value else f"{r.value:.4f} nats ({r.rescaled:.3f})"
        print(f"{r.kind} {node_name(ds.names, r.source)} -> {node_name(ds.names, r.target)}: {shown}")
    return EXIT_OK


def cmd_paths(args) -> int:
    _require(args, "graph", "source", "target")
    g = read_graph(args.graph, tau_max=args.tau_max)
    names = list(g.names)
    if args.source not in names or args.target not in names:
        raise UsageError(f"unknown variable; graph has {', '.join(names)}")
    lags = _parse_lags(args.lag, g.tau_max)
    rows = []
    for lag in lags:
        src, tgt = NodeRef(names.index(args.source), lag), NodeRef(names.index(args.target), 0)
        paths, nodes = causal_paths(g, src, tgt)
        side = sidepath_neighbors(g, src, tgt)
        print(f"{g.node_name(src)} -> {g.node_name(tgt)}: {len(paths)} causal path(s)")
        for p in paths:
            print("  " + " -> ".join(g.node_name(n) for n in p))
            rows.append(["path", lag, " -> ".join(g.node_name(n) for n in p)])
        fmt = lambda ns: "{" + ", ".join(g.node_name(n) for n in sorted(ns)) + "}"
        print(f"  path nodes: {fmt(nodes)}")
        print(f"  sidepath neighbours: {fmt(side)}")
        rows.append(["path_nodes", lag, ";".join(g.node_name(n) for n in sorted(nodes))])
        rows.append(["sidepath_neighbors", lag, ";".join(g.node_name(n) for n in sorted(side))])
        for kind in ("ITX", "MITP"):
            try:
                conds = condition_set(g, kind, src, tgt)
                text = ";".join(g.node_name(n) for n in sorted(conds))
                print(f"  {kind} conditions: {fmt(conds)}")
            except NoCausalPath as exc:
                text = f"undefined: {exc}"
                print(f"  {kind}: {text}")
            rows.append([f"{kind}_conditions", lag, text])
    if args.out:
        out = _out_dir(args)
        write_csv_rows(out / "paths.csv", ("item", "lag", "value"), rows)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_checks

    checks = run_checks(quick=args.quick, seed=args.seed, coefficient_error=args.inject_error)
    for c in checks:
        print(c.line())
    if args.out:
        out = _out_dir(args)
        write_csv_rows(out / "validation.csv", ("check", "status", "measured", "expected", "seconds"),
                       [[c.name, "pass" if c.passed else "fail", c.measured, c.expected, f"{c.seconds:.2f}"]
                        for c in checks])
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def cmd_cib(args) -> int:
    _require(args, "data", "graph")
    ds, g = _load(args)
    cfg = EstimatorConfig(k=args.k or 10, seed=args.seed)
    rows = cib_table(ds, g, args.tau_max, cfg, use_mii=args.mii)
    out = _out_dir(args)
    write_cib_table(out / "cib.csv", rows)
    _write_manifest(out, args)
    col = 2 if args.normalized else 1
    for row in rows:
        value = row[col]
        print(f"{row[0]}: " + ("mediates nothing" if value == "" else f"{value:.4f} over {row[3]} triple(s)"))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file; flags override it")
    common.add_argument("--data", type=Path)
    common.add_argument("--graph", type=Path)
    common.add_argument("--model", type=Path)
    common.add_argument("--tau-max", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--threshold", type=float, default=0.015)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--ensemble", type=int, default=1)
    common.add_argument("--bootstrap", type=int, default=0)
    common.add_argument("--out", type=Path)

    parser = argparse.ArgumentParser(prog="causal-pathways", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a model; write data and its graph")
    p.add_argument("builtin", nargs="?", help=f"builtin model: {', '.join(BUILTIN_MODELS)}")
    p.add_argument("-T", type=int, default=10000)
    p.add_argument("--burn-in", type=int, default=1000)
    for name, default in (("alpha", 0.5), ("a", 0.5), ("b", 0.5), ("c", 0.5), ("sx", 1.0), ("sw", 1.0), ("sy", 1.0)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("discover", parents=[common], help="estimate the time series graph from data")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("measure", parents=[common], help="transfer, interaction or linear effect measures")
    p.add_argument("--kind", help="TE, ITY, MIT, ITX, MITP, IIX, MII, CE or MCE")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--lag", help="single lag, list (1,2) or range (1-4)")
    p.add_argument("--mediator", help="mediator variable(s), comma separated")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("paths", parents=[common], help="list causal paths and conditioning sets")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--lag")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("validate", parents=[common], help="check estimators against analytic oracles")
    p.add_argument("--quick", action="store_true", help="fast subset")
    p.add_argument("--inject-error", type=float, default=0.0,
                   help="perturb the simulated direct coefficient to demonstrate a failing check")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cib", parents=[common], help="causal interaction betweenness per variable")
    p.add_argument("--normalized", action="store_true", help="print the ITX-normalized values")
    p.add_argument("--mii", action="store_true", help="use MII instead of IIX")
    p.set_defaults(func=cmd_cib)
    return parser


def _apply_config(parser, argv):
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None) is None:
        return pre
    values = read_key_values(pre.config)
    sub = parser._subparsers._group_actions[0].choices[pre.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help", "func"):
            raise UsageError(f"{pre.config}: unknown key {key!r}")
        action = known[dest]
        if action.type is not None:
            defaults[dest] = action.type(raw)
        elif isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = raw.lower() in ("1", "true", "yes")
        else:
            defaults[dest] = raw
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args = parser.parse_args(argv) if getattr(args, "config", None) is None else args
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, ModelError, GraphError, EstimatorError, MeasureError,
            DiscoveryError, EffectError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
