"""Graphs, shift operators, graph Fourier transform and bandlimited signals.

Everything here is dense and real symmetric: the graphs of interest have at
most a few hundred nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LAPLACIAN = "laplacian"
ADJACENCY = "adjacency"
SHIFT_KINDS = (LAPLACIAN, ADJACENCY)

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph on nodes ``0..n-1``.

    Edges are stored canonically as ``(i, j)`` with ``i < j``. Weights default
    to one.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        n = int(self.n)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.weights is None:
            weights = np.ones(len(edges))
        else:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if n < 0:
            raise ValueError("node count must be non-negative")
        if len(weights) != len(edges):
            raise ValueError("one weight per edge required")
        if len(edges):
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError(f"node index out of range [0, {n})")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("edge weights must be finite and positive")
        edges = np.sort(edges, axis=1)
        if len(np.unique(edges, axis=0)) != len(edges):
            raise ValueError("duplicate edges")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        i, j = self.edges.T
        W[i, j] = self.weights
        W[j, i] = self.weights
        return W

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def laplacian(self) -> np.ndarray:
        W = self.adjacency()
        return np.diag(W.sum(axis=1)) - W

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges}

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import connected_components

        ncomp, _ = connected_components(csr_matrix(self.adjacency()), directed=False)
        return ncomp == 1

    def same_as(self, other: "Graph") -> bool:
        """Edge-set and weight equality (edge order ignored)."""
        if self.n != other.n or self.num_edges != other.num_edges:
            return False
        return np.array_equal(self.adjacency(), other.adjacency())


@dataclass(frozen=True, eq=False)
class ShiftOperator:
    kind: str
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Orthonormal eigenvectors (columns) and eigenvalues, low frequency first."""

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    kind: str

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class BandSpec:
    """Active frequency band and its in-band GFT coefficients.

    The band is the first ``k`` frequencies, or the last ``k`` when
    ``high_pass`` is set.
    """

    coefficients: np.ndarray
    high_pass: bool = False

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(c) == 0:
            raise ValueError("bandwidth must be at least 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("band coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def k(self) -> int:
        return len(self.coefficients)

    def indices(self, n: int) -> np.ndarray:
        return band_indices(n, self.k, self.high_pass)


def band_indices(n: int, k: int, high_pass: bool = False) -> np.ndarray:
    if not 1 <= k <= n:
        raise ValueError(f"bandwidth k={k} must satisfy 1 <= k <= n={n}")
    return np.arange(n - k, n) if high_pass else np.arange(k)


def build_shift(graph: Graph, kind: str = LAPLACIAN) -> ShiftOperator:
    if kind == LAPLACIAN:
        return ShiftOperator(kind, graph.laplacian())
    if kind == ADJACENCY:
        return ShiftOperator(kind, graph.adjacency())
    raise ValueError(f"unknown shift kind {kind!r}; expected one of {SHIFT_KINDS}")


def _check_symmetric(S: np.ndarray) -> None:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("shift operator must be a square matrix")
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOL:
        raise ValueError("shift operator is not symmetric")


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (first one on ties)."""
    V = np.array(V, dtype=float)
    if V.size == 0:
        return V
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivot, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def eigendecompose(shift: ShiftOperator) -> SpectralBasis:
    """Eigendecomposition of a symmetric shift operator with a fixed frequency order.

    Laplacian eigenvalues are sorted ascending and adjacency eigenvalues
    descending, so the first columns are always the smoothest modes. Each
    eigenvector is sign-normalized with :func:`fix_signs`.
    """
    S = np.asarray(shift.matrix, dtype=float)
    _check_symmetric(S)
    lam, V = np.linalg.eigh((S + S.T) / 2)
    if shift.kind == ADJACENCY:
        lam, V = lam[::-1], V[:, ::-1]
    elif shift.kind != LAPLACIAN:
        raise ValueError(f"unknown shift kind {shift.kind!r}")
    return SpectralBasis(fix_signs(V), np.array(lam), shift.kind)


def graph_basis(graph: Graph, kind: str = LAPLACIAN) -> SpectralBasis:
    return eigendecompose(build_shift(graph, kind))


def gft(basis: SpectralBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != basis.n:
        raise ValueError(f"signal has length {x.shape[0]}, graph has {basis.n} nodes")
    return basis.eigenvectors.T @ x


def igft(basis: SpectralBasis, xf) -> np.ndarray:
    xf = np.asarray(xf, dtype=float)
    if xf.shape[0] != basis.n:
        raise ValueError(f"spectrum has length {xf.shape[0]}, graph has {basis.n} nodes")
    return basis.eigenvectors @ xf


def synthesize_bandlimited(basis: SpectralBasis, band: BandSpec) -> np.ndarray:
    """Node-domain signal ``V_K c`` for the band's active frequencies."""
    idx = band.indices(basis.n)
    return basis.eigenvectors[:, idx] @ band.coefficients


def bandlimiting_filter(basis: SpectralBasis, k: int, high_pass: bool = False) -> np.ndarray:
    """Orthogonal projector ``V_K V_K^T`` onto the active band."""
    VK = basis.eigenvectors[:, band_indices(basis.n, k, high_pass)]
    H = VK @ VK.T
    return (H + H.T) / 2


def spectral_norm(shift) -> float:
    """Largest absolute eigenvalue of a symmetric operator (matrix or ShiftOperator)."""
    S = np.asarray(getattr(shift, "matrix", shift), dtype=float)
    _check_symmetric(S)
    if S.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(S)), initial=0.0))
