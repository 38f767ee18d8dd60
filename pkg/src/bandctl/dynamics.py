"""Diffusion transition matrices on RES(p) graphs and controlled trajectories.

Controls are arrays of shape ``(T, M)`` whose row ``t`` is ``u_t``. The
stacked vector used by the controllers runs backwards in time,
``u = [u_{T-1}; ...; u_0]`` (see :func:`stack_controls`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gsp import ADJACENCY, LAPLACIAN, Graph, spectral_norm
from .random_graph import sample_edge_mask

# slack on the stability bound eps <= 1/||L||_2
_EPS_SLACK = 1e-12


@dataclass(frozen=True)
class DiffusionModel:
    """Transition rule mapping a graph realization to ``A_t``.

    ``kind="laplacian"``: ``A_t = I - eps L_t``; ``eps=None`` means the
    largest stable step ``1/||L||_2`` of the underlying graph.
    ``kind="adjacency"``: ``A_t = W_t``.
    """

    kind: str = LAPLACIAN
    eps: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (LAPLACIAN, ADJACENCY):
            raise ValueError(f"unknown diffusion model {self.kind!r}")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("step size eps must be positive")

    def bind(self, g: Graph) -> "DiffusionModel":
        """Resolve and validate the step size against the underlying graph ``g``."""
        if self.kind != LAPLACIAN:
            return self
        rho = spectral_norm(g.laplacian())
        if self.eps is None:
            return DiffusionModel(LAPLACIAN, 1.0 / rho if rho > 0 else 1.0)
        if rho > 0 and self.eps > (1.0 + _EPS_SLACK) / rho:
            raise ValueError(f"eps={self.eps} exceeds the stability bound 1/||L||_2={1.0 / rho}")
        return self

    def rho(self, g: Graph) -> float:
        """Bound on ``||A_t||_2`` over all realizations of ``g``."""
        return 1.0 if self.kind == LAPLACIAN else spectral_norm(g.adjacency())


def transition_matrix(model: DiffusionModel, realization: Graph,
                      underlying: Optional[Graph] = None) -> np.ndarray:
    """``A_t`` for one realization. The step size is validated against
    ``underlying`` (the realization itself when omitted)."""
    model = model.bind(underlying if underlying is not None else realization)
    if model.kind == ADJACENCY:
        return realization.adjacency()
    return np.eye(realization.n) - model.eps * realization.laplacian()


def mean_transition(model: DiffusionModel, g: Graph, p: float) -> np.ndarray:
    """``E[A_t]`` under RES(p): ``I - eps p L`` or ``p W``."""
    model = model.bind(g)
    if model.kind == ADJACENCY:
        return p * g.adjacency()
    return np.eye(g.n) - model.eps * p * g.laplacian()


def mean_spectrum(model: DiffusionModel, g: Graph, p: float, eigenvalues: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``E[A_t]`` in the order of the shift-operator ``eigenvalues``."""
    model = model.bind(g)
    if model.kind == ADJACENCY:
        return p * np.asarray(eigenvalues)
    return 1.0 - model.eps * p * np.asarray(eigenvalues)


def transition_batch(model: DiffusionModel, g: Graph, masks: np.ndarray) -> np.ndarray:
    """Stack of ``A_t`` for edge-activation ``masks`` of shape ``(R, |E|)``."""
    model = model.bind(g)
    masks = np.atleast_2d(masks)
    R = masks.shape[0]
    i, j = g.edges.T
    Wt = np.zeros((R, g.n, g.n))
    vals = masks * g.weights
    Wt[:, i, j] = vals
    Wt[:, j, i] = vals
    if model.kind == ADJACENCY:
        return Wt
    deg = Wt.sum(axis=2)
    A = model.eps * Wt
    idx = np.arange(g.n)
    A[:, idx, idx] = 1.0 - model.eps * deg
    return A


def check_selection(sel: Sequence[int], n: int) -> np.ndarray:
    sel = np.asarray(sel, dtype=np.int64).reshape(-1)
    if len(sel) == 0:
        raise ValueError("select at least one node")
    if sel.min() < 0 or sel.max() >= n:
        raise ValueError(f"selected node out of range [0, {n})")
    if len(np.unique(sel)) != len(sel):
        raise ValueError("selected nodes must be distinct")
    return sel


def selection_matrix(sel: Sequence[int], n: int) -> np.ndarray:
    """Binary ``M x N`` matrix ``C`` picking the rows ``sel`` of the identity."""
    sel = check_selection(sel, n)
    C = np.zeros((len(sel), n))
    C[np.arange(len(sel)), sel] = 1.0
    return C


def stack_controls(controls: np.ndarray) -> np.ndarray:
    """``(T, M)`` controls -> stacked ``[u_{T-1}; ...; u_0]``."""
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    return controls[::-1].reshape(-1)


def unstack_controls(u: np.ndarray, T: int) -> np.ndarray:
    """Inverse of :func:`stack_controls`."""
    u = np.asarray(u, dtype=float)
    return u.reshape(T, -1)[::-1].copy()


def _inputs(sel, controls, n):
    sel = check_selection(sel, n)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if controls.shape[1] != len(sel):
        raise ValueError(f"controls have {controls.shape[1]} columns for {len(sel)} driving nodes")
    if controls.shape[0] < 1:
        raise ValueError("horizon T must be at least 1")
    inj = np.zeros((controls.shape[0], n))
    inj[:, sel] = controls
    return inj


def simulate(model: DiffusionModel, g: Graph, p: float, sel, controls,
             rng: np.random.Generator, x0=None) -> np.ndarray:
    """One trajectory ``x_0..x_T`` of ``x_t = A_{t-1} x_{t-1} + C^T u_{t-1}``.

    A fresh RES realization is drawn at every step. Returns shape ``(T+1, N)``.
    """
    model = model.bind(g)
    inj = _inputs(sel, controls, g.n)
    T = inj.shape[0]
    x = np.zeros((T + 1, g.n))
    if x0 is not None:
        x[0] = x0
    for t in range(1, T + 1):
        A = transition_batch(model, g, sample_edge_mask(g, p, rng))[0]
        x[t] = A @ x[t - 1] + inj[t - 1]
    return x


def simulate_final(model: DiffusionModel, g: Graph, p: float, sel, controls,
                   rng: np.random.Generator, n_draws: int, x0=None,
                   chunk: int = 1000) -> np.ndarray:
    """Final states ``x_T`` of ``n_draws`` independent trajectories, shape ``(R, N)``."""
    model = model.bind(g)
    inj = _inputs(sel, controls, g.n)
    T = inj.shape[0]
    out = np.empty((n_draws, g.n))
    for start in range(0, n_draws, chunk):
        R = min(chunk, n_draws - start)
        x = np.zeros((R, g.n)) if x0 is None else np.tile(np.asarray(x0, dtype=float), (R, 1))
        for t in range(T):
            A = transition_batch(model, g, sample_edge_mask(g, p, rng, size=R))
            x = np.einsum("rij,rj->ri", A, x) + inj[t]
        out[start:start + R] = x
    return out


def mean_evolution(abar: np.ndarray, sel, controls, x0=None) -> np.ndarray:
    """Deterministic mean state ``mu_T`` under the mean transition ``abar``."""
    n = abar.shape[0]
    inj = _inputs(sel, controls, n)
    mu = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    for t in range(inj.shape[0]):
        mu = abar @ mu + inj[t]
    return mu
