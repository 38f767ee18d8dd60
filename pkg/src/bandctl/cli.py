"""Command-line interface.

Subcommands: ``generate``, ``spectrum``, ``select``, ``control``,
``evaluate`` and ``sweep``. Exit status is 0 on success, 1 on a
configuration error and 2 when no feasible design exists.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import control as ctl
from .experiment import (GRAPH_SOURCES, SPECTRUM_SHAPES, STRATEGIES, SWEEPABLE, ConfigError,
                         DesignContext, ExperimentConfig, all_infeasible, build_graph, design,
                         emit, evaluate, run)
from .gsp import ADJACENCY, LAPLACIAN
from .random_graph import ConnectivityError, EdgeListError, format_edge_list, rng_stream

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2

# config fields settable from the command line (flag name = field in kebab-case)
_FIELDS = {
    "graph": str, "edge_list": str, "n": int, "p_er": float, "k_nn": int, "model": str,
    "eps": float, "p_res": float, "T": int, "M": int, "K": int, "spectrum": str,
    "n_graphs": int, "n_res": int, "n_random": int,
}


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; exit status 2 means infeasible here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_config_flags(ap: argparse.ArgumentParser, seed_required: bool = False) -> None:
    ap.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    ap.add_argument("--seed", type=int, required=seed_required, default=None)
    ap.add_argument("--graph", choices=GRAPH_SOURCES)
    ap.add_argument("--edge-list", help="edge-list file (implies --graph edge_list)")
    ap.add_argument("--n", type=int)
    ap.add_argument("--p-er", type=float)
    ap.add_argument("--k-nn", type=int)
    ap.add_argument("--model", choices=(LAPLACIAN, ADJACENCY))
    ap.add_argument("--eps", type=float)
    ap.add_argument("--p-res", type=float)
    ap.add_argument("--T", type=int)
    ap.add_argument("--M", type=int)
    ap.add_argument("--K", type=int)
    ap.add_argument("--spectrum", choices=SPECTRUM_SHAPES)
    ap.add_argument("--n-graphs", type=int)
    ap.add_argument("--n-res", type=int)
    ap.add_argument("--n-random", type=int)
    ap.add_argument("--graph-index", type=int, default=0,
                    help="which generated graph of the seed to use")


def _config(args, base=None, **extra) -> ExperimentConfig:
    d = dict(base or {})
    if args.config:
        try:
            with open(args.config) as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        d.update(loaded)
    for name in _FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            d[name] = value
    if getattr(args, "edge_list", None):
        d["graph"] = "edge_list"
    if args.seed is not None:
        d["seed"] = args.seed
    d.setdefault("seed", 0)
    d.update({k: v for k, v in extra.items() if v is not None})
    try:
        return ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def _dump(obj, path) -> None:
    _write(json.dumps(obj, indent=2, sort_keys=True) + "\n", path)


def cmd_generate(args) -> int:
    cfg = _config(args)
    if cfg.graph not in ("geometric", "er"):
        raise ConfigError("generate needs --graph geometric or --graph er")
    _write(format_edge_list(build_graph(cfg, args.graph_index)), args.out)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    ctx = DesignContext.build(cfg, build_graph(cfg, args.graph_index))
    _dump({"spectrum": cfg.spectrum, "K": cfg.K, "high_pass": ctx.band.high_pass,
           "coefficients": ctx.band.coefficients.tolist(),
           "signal": ctx.target.tolist()}, args.out)
    return EXIT_OK


def _plan(args):
    cfg = _config(args, strategies=[args.strategy])
    ctx = DesignContext.build(cfg, build_graph(cfg, args.graph_index))
    rng = rng_stream(cfg.seed, 2, 0, args.graph_index)
    return cfg, ctx, design(args.strategy, cfg, ctx, rng)


def cmd_select(args) -> int:
    cfg, ctx, plan = _plan(args)
    _dump({"selection": list(plan.selection), "strategy": args.strategy}, args.out)
    return EXIT_OK


def cmd_control(args) -> int:
    cfg, ctx, plan = _plan(args)
    doc = plan.to_dict()
    doc["predicted_normalized_mse"] = plan.predicted_mse / ctx.stacked.alpha
    doc["strategy"] = args.strategy
    doc["config"] = cfg.to_dict()
    _dump(doc, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        with open(args.plan) as f:
            doc = json.load(f)
        plan = ctl.ControlPlan.from_dict(doc)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read plan {args.plan}: {exc}") from None
    # the plan's own config is the default; --config and flags override it
    cfg = _config(args, base=doc.get("config"), strategies=["zero"])
    if plan.T != cfg.T:
        raise ConfigError(f"plan horizon {plan.T} does not match T={cfg.T}")
    ctx = DesignContext.build(cfg, build_graph(cfg, args.graph_index))
    rng = rng_stream(cfg.seed, 1, 0, args.graph_index, 0)
    mean, se = evaluate(plan, ctx, cfg.n_res, rng)
    _dump({"normalized_mse": mean, "stderr": se, "n_res": cfg.n_res, "p_res": cfg.p_res,
           "selection": list(plan.selection)}, args.out)
    return EXIT_OK


def _parse_grid(text: str, var: str) -> list:
    conv = SWEEPABLE.get(var)
    if conv is None:
        raise ConfigError(f"cannot sweep {var!r}; choose from {sorted(SWEEPABLE)}")
    try:
        return [conv(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r} for {var}") from None


def cmd_sweep(args) -> int:
    extra = {}
    if args.strategy:
        extra["strategies"] = args.strategy
    if args.sweep_var:
        if not args.grid:
            raise ConfigError("--sweep-var needs --grid")
        extra["sweep_var"] = args.sweep_var
        extra["grid"] = _parse_grid(args.grid, args.sweep_var)
    cfg = _config(args, **extra)
    results = run(cfg)
    text = emit(results, args.format, None, cfg)
    _write(text, args.out)
    for r in results:
        for err in r.errors:
            print(f"[{r.strategy} {r.sweep_var}={r.value}] {err}", file=sys.stderr)
    return EXIT_INFEASIBLE if all_infeasible(results) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bandctl", description=__doc__.splitlines()[0],
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", allow_abbrev=False, help="write a generated graph as an edge list")
    _add_config_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("spectrum", allow_abbrev=False, help="emit the target spectrum and signal")
    _add_config_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_spectrum)

    for name, func, help_ in (("select", cmd_select, "driving-node selection only"),
                              ("control", cmd_control, "full control plan as JSON")):
        p = sub.add_parser(name, help=help_, allow_abbrev=False)
        _add_config_flags(p)
        p.add_argument("--strategy", choices=STRATEGIES, default="biased_greedy")
        p.add_argument("--out", default="-")
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", allow_abbrev=False, help="Monte Carlo evaluation of a saved plan")
    _add_config_flags(p)
    p.add_argument("--plan", required=True, help="plan JSON written by 'control'")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", allow_abbrev=False, help="full experiment over a parameter grid")
    _add_config_flags(p, seed_required=True)
    p.add_argument("--strategy", action="append", choices=STRATEGIES,
                   help="repeat for several strategies")
    p.add_argument("--sweep-var", choices=sorted(SWEEPABLE))
    p.add_argument("--grid", help="comma-separated values of the sweep variable")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, usage errors exit EXIT_CONFIG
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except ctl.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, EdgeListError, ConnectivityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
