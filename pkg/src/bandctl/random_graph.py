"""Random edge sampling, synthetic graph generators and edge-list files."""

from __future__ import annotations

import os
from importlib import resources

import numpy as np

from .gsp import Graph

MAX_CONNECT_ATTEMPTS = 1000


class EdgeListError(ValueError):
    """Malformed edge-list file."""


class ConnectivityError(RuntimeError):
    """A generator failed to produce a connected graph within the attempt cap."""


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Independent reproducible generator for ``(seed, stream...)``.

    Streams with different ids are statistically independent; the same
    ``(seed, stream)`` always reproduces the same sequence.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"probability must lie in (0, 1], got {p}")
    return p


def sample_edge_mask(g: Graph, p: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Bernoulli(p) activation mask over ``g``'s edges; shape ``size + (|E|,)``."""
    p = _check_p(p)
    shape = (g.num_edges,) if size is None else tuple(np.atleast_1d(size)) + (g.num_edges,)
    if p == 1.0:
        return np.ones(shape, dtype=bool)
    return rng.random(shape) < p


def sample_res(g: Graph, p: float, rng: np.random.Generator) -> Graph:
    """One RES(p) realization: each edge kept independently with probability ``p``."""
    keep = sample_edge_mask(g, p, rng)
    return Graph(g.n, g.edges[keep], g.weights[keep])


def generate_er(n: int, p_er: float, rng: np.random.Generator,
                require_connected: bool = True) -> Graph:
    """Erdos-Renyi graph with unit weights."""
    if n < 2:
        raise ValueError("need at least two nodes")
    p_er = _check_p(p_er)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(MAX_CONNECT_ATTEMPTS):
        keep = rng.random(len(iu)) < p_er
        g = Graph(n, np.column_stack([iu[keep], ju[keep]]))
        if not require_connected or g.is_connected():
            return g
    raise ConnectivityError(
        f"no connected ER(n={n}, p={p_er}) graph in {MAX_CONNECT_ATTEMPTS} attempts")


def knn_graph(points: np.ndarray, k_nn: int) -> Graph:
    """Gaussian-kernel kNN graph, symmetrized by union.

    Edge ``(i, j)`` is kept when ``j`` is among the ``k_nn`` nearest
    neighbours of ``i`` or vice versa; weight ``exp(-d_ij**2)``. Distance ties
    go to the lower node index.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k_nn < n:
        raise ValueError(f"need 1 <= k_nn < n, got k_nn={k_nn}, n={n}")
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    keep = np.zeros((n, n), dtype=bool)
    for i in range(n):
        order = np.argsort(d2[i], kind="stable")
        order = order[order != i][:k_nn]
        keep[i, order] = True
    keep |= keep.T
    iu, ju = np.nonzero(np.triu(keep, k=1))
    return Graph(n, np.column_stack([iu, ju]), np.exp(-d2[iu, ju]))


def generate_geometric(n: int, k_nn: int, rng: np.random.Generator,
                       require_connected: bool = True) -> Graph:
    """Random geometric kNN graph on points uniform in the unit square."""
    if not 1 <= k_nn < n:
        raise ValueError(f"need 1 <= k_nn < n, got k_nn={k_nn}, n={n}")
    for _ in range(MAX_CONNECT_ATTEMPTS):
        g = knn_graph(rng.random((n, 2)), k_nn)
        if not require_connected or g.is_connected():
            return g
    raise ConnectivityError(
        f"no connected geometric(n={n}, k_nn={k_nn}) graph in {MAX_CONNECT_ATTEMPTS} attempts")


def parse_edge_list(text: str, source: str = "<string>") -> Graph:
    """Parse the edge-list format.

    First meaningful line: node count. Every following non-empty line not
    starting with ``#`` is ``i j [w]`` with 0-based indices and an optional
    positive weight (default 1.0).
    """
    n = None
    edges, weights, seen = [], [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        where = f"{source}:{lineno}"
        if n is None:
            if len(parts) != 1:
                raise EdgeListError(f"{where}: expected node count, got {line!r}")
            try:
                n = int(parts[0])
            except ValueError:
                raise EdgeListError(f"{where}: node count is not an integer: {line!r}") from None
            if n < 0:
                raise EdgeListError(f"{where}: negative node count")
            continue
        if len(parts) not in (2, 3):
            raise EdgeListError(f"{where}: expected 'i j [w]', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise EdgeListError(f"{where}: cannot parse {line!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise EdgeListError(f"{where}: node index out of range [0, {n})")
        if i == j:
            raise EdgeListError(f"{where}: self-loop on node {i}")
        if not (np.isfinite(w) and w > 0):
            raise EdgeListError(f"{where}: non-positive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise EdgeListError(f"{where}: duplicate edge {key} (first on line {seen[key]})")
        seen[key] = lineno
        edges.append(key)
        weights.append(w)
    if n is None:
        raise EdgeListError(f"{source}: missing node count")
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(weights))


def load_edge_list(path) -> Graph:
    with open(path) as f:
        return parse_edge_list(f.read(), source=os.fspath(path))


def format_edge_list(g: Graph) -> str:
    lines = [str(g.n)]
    unit = np.all(g.weights == 1.0)
    for (i, j), w in zip(g.edges, g.weights):
        lines.append(f"{i} {j}" if unit else f"{i} {j} {float(w)!r}")
    return "\n".join(lines) + "\n"


def save_edge_list(g: Graph, path) -> None:
    with open(path, "w") as f:
        f.write(format_edge_list(g))


def load_bundled(name: str) -> Graph:
    """Bundled fixture graphs: ``"zachary"`` (34 nodes) or ``"florentine"`` (15 nodes)."""
    text = resources.files("bandctl.data").joinpath(f"{name}.txt").read_text()
    return parse_edge_list(text, source=name)
