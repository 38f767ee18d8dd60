"""Experiment runner: design on the expected graph, evaluate under RES draws.

A run is a sweep over one configuration field. Each cell averages the
empirical normalized MSE over ``n_graphs`` underlying graphs and ``n_res``
fresh RES trajectories per graph. All randomness comes from
:func:`~bandctl.random_graph.rng_stream` keyed by the seed and the cell,
graph and strategy indices, so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import control as ctl
from .dynamics import DiffusionModel, stack_controls
from .gsp import ADJACENCY, LAPLACIAN, BandSpec, Graph, bandlimiting_filter, graph_basis, synthesize_bandlimited
from .mse import mse_coefficients, mse_empirical, stack
from .random_graph import generate_er, generate_geometric, load_bundled, load_edge_list, rng_stream

SPECTRUM_SHAPES = ("step_low_pass", "step_high_pass", "linear_decay", "exponential_decay")
STRATEGIES = ("unbiased_greedy", "biased_greedy", "exhaustive", "random",
              "deterministic_baseline", "zero")
GRAPH_SOURCES = ("geometric", "er", "zachary", "florentine", "edge_list")
SWEEPABLE = {"p_res": float, "T": int, "M": int, "K": int, "n": int, "k_nn": int,
             "p_er": float, "eps": float, "spectrum": str}
CSV_COLUMNS = ("sweep_var", "value", "strategy", "mean_mse", "std_graphs", "stderr_res",
               "n_graphs", "n_res", "seed")

# rng stream ids
_GRAPH_STREAM, _EVAL_STREAM, _RANDOM_SEL_STREAM = 0, 1, 2


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def target_spectrum(shape: str, K: int, normalize: bool = True) -> BandSpec:
    """In-band target coefficients for a named spectrum shape.

    ``linear_decay`` is ``1 - (k-1)/K`` and ``exponential_decay`` is
    ``exp(1-k)`` for ``k = 1..K``; the step shapes are flat. With
    ``normalize`` the coefficients have unit norm, which gives a unit-energy
    target since ``V_K`` is orthonormal.
    """
    if K < 1:
        raise ValueError("bandwidth K must be at least 1")
    k = np.arange(1, K + 1)
    if shape in ("step_low_pass", "step_high_pass"):
        c = np.ones(K)
    elif shape == "linear_decay":
        c = 1.0 - (k - 1) / K
    elif shape == "exponential_decay":
        c = np.exp(1.0 - k)
    else:
        raise ValueError(f"unknown spectrum shape {shape!r}; expected one of {SPECTRUM_SHAPES}")
    if normalize:
        c = c / np.linalg.norm(c)
    return BandSpec(c, high_pass=(shape == "step_high_pass"))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    graph: str = "geometric"
    edge_list: Optional[str] = None
    n: int = 100
    p_er: float = 0.5
    k_nn: int = 5
    model: str = LAPLACIAN
    eps: Optional[float] = None
    p_res: float = 0.95
    T: int = 8
    M: int = 8
    K: int = 10
    spectrum: str = "linear_decay"
    strategies: tuple = ("biased_greedy",)
    n_graphs: int = 20
    n_res: int = 500
    n_random: int = 20
    sweep_var: Optional[str] = None
    grid: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "grid", tuple(self.grid))
        self.validate()

    def validate(self) -> None:
        if self.graph not in GRAPH_SOURCES:
            raise ConfigError(f"unknown graph source {self.graph!r}; expected one of {GRAPH_SOURCES}")
        if self.graph == "edge_list" and not self.edge_list:
            raise ConfigError("graph 'edge_list' needs an edge_list path")
        if self.model not in (LAPLACIAN, ADJACENCY):
            raise ConfigError(f"unknown model {self.model!r}")
        for name in self.strategies:
            if name not in STRATEGIES:
                raise ConfigError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for name in ("n_graphs", "n_res", "n_random"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.sweep_var is None:
            if self.grid:
                raise ConfigError("grid given without sweep_var")
            self._check_cell(self)
        else:
            if self.sweep_var not in SWEEPABLE:
                raise ConfigError(f"cannot sweep {self.sweep_var!r}; choose from {sorted(SWEEPABLE)}")
            if not self.grid:
                raise ConfigError("sweep_var given with an empty grid")
            for value in self.grid:
                self._check_cell(self.cell(value))

    @staticmethod
    def _check_cell(c: "ExperimentConfig") -> None:
        if not 0.0 < c.p_res <= 1.0:
            raise ConfigError(f"p_res must lie in (0, 1], got {c.p_res}")
        if not 0.0 < c.p_er <= 1.0:
            raise ConfigError(f"p_er must lie in (0, 1], got {c.p_er}")
        if min(c.T, c.M, c.K) < 1:
            raise ConfigError("T, M and K must be at least 1")
        if c.eps is not None and c.eps <= 0:
            raise ConfigError("eps must be positive")
        if c.spectrum not in SPECTRUM_SHAPES:
            raise ConfigError(f"unknown spectrum {c.spectrum!r}; expected one of {SPECTRUM_SHAPES}")
        needs_mean_control = {"unbiased_greedy", "deterministic_baseline"} & set(c.strategies)
        if needs_mean_control and c.M < ctl.necessary_nodes(c.K, c.T):
            raise ConfigError(f"M={c.M} < ceil(K/T)={ctl.necessary_nodes(c.K, c.T)}: "
                              "the unbiased strategies cannot be feasible")
        if c.graph in ("geometric", "er"):
            if c.n < 2:
                raise ConfigError("n must be at least 2")
            if c.graph == "geometric" and not 1 <= c.k_nn < c.n:
                raise ConfigError(f"need 1 <= k_nn < n, got k_nn={c.k_nn}, n={c.n}")

    def cell(self, value) -> "ExperimentConfig":
        """Single-cell configuration with the sweep variable set to ``value``."""
        if self.sweep_var is None:
            return self
        kw = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        kw.update({self.sweep_var: SWEEPABLE[self.sweep_var](value),
                   "sweep_var": None, "grid": ()})
        return ExperimentConfig(**kw)

    def cells(self) -> list:
        if self.sweep_var is None:
            return [(None, self)]
        return [(v, self.cell(v)) for v in self.grid]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["strategies"] = list(self.strategies)
        d["grid"] = list(self.grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in d:
            raise ConfigError("config needs a seed")
        return cls(**d)


@dataclass
class CellResult:
    sweep_var: Optional[str]
    value: object
    strategy: str
    mean_mse: float
    std_graphs: float
    stderr_res: float
    n_graphs: int
    n_res: int
    seed: int
    mean_predicted: float = math.nan
    wall_time: float = 0.0
    errors: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.n_graphs > 0


def build_graph(config: ExperimentConfig, index: int = 0) -> Graph:
    """Underlying graph number ``index`` of the configuration."""
    if config.graph == "edge_list":
        return load_edge_list(config.edge_list)
    if config.graph in ("zachary", "florentine"):
        return load_bundled(config.graph)
    rng = rng_stream(config.seed, _GRAPH_STREAM, index)
    if config.graph == "er":
        return generate_er(config.n, config.p_er, rng)
    return generate_geometric(config.n, config.k_nn, rng)


@dataclass(frozen=True, eq=False)
class DesignContext:
    """Everything the designer may look at: the underlying graph and ``p``."""

    model: DiffusionModel
    graph: Graph
    p: float
    T: int
    band: BandSpec
    h: np.ndarray
    target: np.ndarray
    sys: ctl.InbandSystem
    stacked: object

    @classmethod
    def build(cls, config: ExperimentConfig, g: Graph, p: Optional[float] = None) -> "DesignContext":
        p = config.p_res if p is None else p
        model = DiffusionModel(config.model, config.eps).bind(g)
        basis = graph_basis(g, config.model)
        band = target_spectrum(config.spectrum, config.K)
        if band.k > g.n:
            raise ConfigError(f"K={band.k} exceeds the graph size {g.n}")
        h = bandlimiting_filter(basis, band.k, band.high_pass)
        target = synthesize_bandlimited(basis, band)
        sys = ctl.inband_system(model, g, p, basis, band)
        stacked = stack(mse_coefficients(model, g, p, h, target, config.T))
        return cls(model, g, p, config.T, band, h, target, sys, stacked)


def design(strategy: str, config: ExperimentConfig, ctx: DesignContext,
           rng: Optional[np.random.Generator] = None) -> ctl.ControlPlan:
    """Control plan for one strategy, computed from ``(graph, p)`` only."""
    M, T = config.M, config.T
    if strategy == "unbiased_greedy":
        return ctl.greedy_select_unbiased(M, T, ctx.sys, ctx.stacked)
    if strategy == "biased_greedy":
        return ctl.greedy_select_biased(M, T, ctx.stacked)
    if strategy == "exhaustive":
        return ctl.exhaustive_select(M, ctx.stacked, ctl.biased_objective(ctx.stacked), biased=True)
    if strategy == "random":
        if rng is None:
            raise ValueError("the random strategy needs an rng")
        sel = ctl.random_select(ctx.graph.n, M, rng)
        return ctl.plan_for_selection(sel, ctx.stacked, ctl.biased_objective(ctx.stacked), True)
    if strategy == "deterministic_baseline":
        ideal = ctx if ctx.p == 1.0 else DesignContext.build(config, ctx.graph, p=1.0)
        plan = ctl.deterministic_baseline(M, T, ideal.sys, ideal.stacked)
        # same inputs, judged by the true (p < 1) MSE
        u = stack_controls(plan.controls)
        return ctl.ControlPlan(plan.selection, plan.controls,
                               ctx.stacked.mse(plan.selection, u), False)
    if strategy == "zero":
        return ctl.ControlPlan((0,), np.zeros((T, 1)), ctx.stacked.alpha, False)
    raise ValueError(f"unknown strategy {strategy!r}")


def evaluate(plan: ctl.ControlPlan, ctx: DesignContext, n_res: int,
             rng: np.random.Generator) -> tuple:
    """Empirical ``(normalized MSE, standard error)`` over fresh RES trajectories."""
    alpha = ctx.stacked.alpha
    if not np.any(plan.controls):
        # x_T = 0 on every realization
        return 1.0, 0.0
    mean, se = mse_empirical(ctx.model, ctx.graph, ctx.p, ctx.h, ctx.target,
                             plan.selection, plan.controls, n_res, rng)
    return mean / alpha, se / alpha


def run(config: ExperimentConfig) -> list:
    """Run every sweep cell and strategy; returns a list of :class:`CellResult`.

    Infeasible designs are recorded per graph in ``errors`` and excluded from
    the averages; a cell with no feasible graph reports NaN.
    """
    results = []
    for ci, (value, cell) in enumerate(config.cells()):
        per = {s: {"mse": [], "se": [], "pred": [], "errors": [], "time": 0.0}
               for s in cell.strategies}
        for gi in range(cell.n_graphs):
            g = build_graph(cell, gi)
            ctx = DesignContext.build(cell, g)
            for si, strategy in enumerate(cell.strategies):
                acc = per[strategy]
                t0 = time.perf_counter()
                try:
                    reps = cell.n_random if strategy == "random" else 1
                    sel_rng = rng_stream(cell.seed, _RANDOM_SEL_STREAM, ci, gi)
                    eval_rng = rng_stream(cell.seed, _EVAL_STREAM, ci, gi, si)
                    mses, ses, preds = [], [], []
                    for _ in range(reps):
                        plan = design(strategy, cell, ctx, sel_rng)
                        m, s = evaluate(plan, ctx, cell.n_res, eval_rng)
                        mses.append(m)
                        ses.append(s)
                        preds.append(plan.predicted_mse / ctx.stacked.alpha)
                    acc["mse"].append(float(np.mean(mses)))
                    acc["se"].append(float(np.sqrt(np.sum(np.square(ses)))) / reps)
                    acc["pred"].append(float(np.mean(preds)))
                except ctl.InfeasibleError as exc:
                    acc["errors"].append(f"graph {gi}: {exc}")
                acc["time"] += time.perf_counter() - t0
        for strategy in cell.strategies:
            acc = per[strategy]
            k = len(acc["mse"])
            results.append(CellResult(
                sweep_var=config.sweep_var, value=value, strategy=strategy,
                mean_mse=float(np.mean(acc["mse"])) if k else math.nan,
                std_graphs=float(np.std(acc["mse"], ddof=1)) if k > 1 else 0.0,
                stderr_res=float(np.sqrt(np.sum(np.square(acc["se"])))) / k if k else math.nan,
                n_graphs=k, n_res=cell.n_res, seed=cell.seed,
                mean_predicted=float(np.mean(acc["pred"])) if k else math.nan,
                wall_time=acc["time"], errors=acc["errors"]))
    return results


def all_infeasible(results: list) -> bool:
    return bool(results) and not any(r.feasible for r in results)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def to_csv(results: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        writer.writerow([_fmt(r.sweep_var), _fmt(r.value), r.strategy, _fmt(r.mean_mse),
                         _fmt(r.std_graphs), _fmt(r.stderr_res), r.n_graphs, r.n_res, r.seed])
    return buf.getvalue()


def _json_float(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def to_json(results: list, config: Optional[ExperimentConfig] = None) -> str:
    records = []
    for r in results:
        d = dataclasses.asdict(r)
        records.append({k: _json_float(v) for k, v in d.items()})
    doc = {"config": config.to_dict() if config is not None else None, "results": records}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit(results: list, format: str, path=None, config: Optional[ExperimentConfig] = None) -> str:
    """Serialize ``results`` as CSV or JSON; write to ``path`` when given."""
    if not results:
        raise ValueError("no results to emit")
    if format == "csv":
        text = to_csv(results)
    elif format == "json":
        text = to_json(results, config)
    else:
        raise ValueError(f"unknown format {format!r}; expected 'csv' or 'json'")
    if path is not None:
        try:
            with open(path, "w", newline="") as f:
                f.write(text)
        except OSError as exc:
            raise OSError(f"cannot write results to {os.fspath(path)}: {exc.strerror}") from exc
    return text


def load_results(path) -> list:
    """Read back a JSON result file written by :func:`emit`."""
    with open(path) as f:
        doc = json.load(f)
    out = []
    for d in doc["results"]:
        d = {k: (math.nan if v is None and k in ("mean_mse", "std_graphs", "stderr_res",
                                                   "mean_predicted") else v)
             for k, v in d.items()}
        out.append(CellResult(**d))
    return out
