"""Mean squared error of open-loop control on RES(p) graphs.

For ``x_0 = 0`` and filter ``H`` the error ``E||H x_T - x*||^2`` is a
quadratic in the injected inputs ``z_t = C^T u_t``::

    MSE = alpha - 2 sum_t beta_t^T z_t + sum_{t,s} z_t^T Gamma[t, s] z_s

with ``alpha = ||x*||^2``, ``beta_t = (Abar^{T-t-1})^T H^T x*`` and
``Gamma[t, s] = E[Phi_t^T H^T H Phi_s]`` where ``Phi_t = A_{T-1} ... A_{t+1}``
(identity when ``t = T-1``).

The second moments are computed exactly for the two diffusion models by a
backward recursion ``Q_a = E[A^T Q_{a-1} A]`` starting from ``Q_0 = H^T H``,
and checked against brute-force enumeration of edge subsets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import (DiffusionModel, check_selection, mean_transition,
                       simulate_final, transition_batch)
from .gsp import ADJACENCY, Graph

MAX_ENUMERATION = 10 ** 6


@dataclass(frozen=True, eq=False)
class MseCoefficients:
    """Coefficients of the MSE quadratic.

    ``beta[t]`` and ``gamma[t, s]`` are indexed by time (``t = 0..T-1``).
    """

    alpha: float
    beta: np.ndarray   # (T, N)
    gamma: np.ndarray  # (T, T, N, N)
    # bias/variance split of the same quadratic (see mse_decomposed)
    target: Optional[np.ndarray] = None     # (N,)
    mean_gain: Optional[np.ndarray] = None  # (T, N, N), H Abar^{T-t-1}
    variance: Optional[np.ndarray] = None   # (T, T, N, N)

    @property
    def T(self) -> int:
        return self.beta.shape[0]

    @property
    def n(self) -> int:
        return self.beta.shape[1]


@dataclass(frozen=True, eq=False)
class StackedSystem:
    """Coefficients laid out for the stacked input ``u = [u_{T-1}; ...; u_0]``.

    Besides ``(Gamma, beta)`` it keeps the split ``Gamma = B^T B + V`` into
    the mean map ``B = [H, H Abar, ..., H Abar^{T-1}]`` and the variance
    part ``V``. :meth:`mse` evaluates ``||B u - x*||^2 + u^T V u``, which
    avoids the cancellation in ``alpha - 2 beta^T u + u^T Gamma u`` when
    ``u`` is large.
    """

    alpha: float
    gamma_big: np.ndarray  # (N T, N T)
    beta_big: np.ndarray   # (N T,)
    T: int
    n: int
    target: Optional[np.ndarray] = None    # (N,)
    mean_big: Optional[np.ndarray] = None  # (N, N T)
    var_big: Optional[np.ndarray] = None   # (N T, N T)

    def indices(self, sel) -> np.ndarray:
        sel = check_selection(sel, self.n)
        return (np.arange(self.T)[:, None] * self.n + sel[None, :]).reshape(-1)

    def restrict(self, sel):
        """``(Gamma_C, beta_C)`` for driving nodes ``sel``."""
        idx = self.indices(sel)
        return self.gamma_big[np.ix_(idx, idx)], self.beta_big[idx]

    def factor(self, sel):
        """``(F, r)`` with ``MSE(u) = ||F u - r||^2`` for driving nodes ``sel``.

        ``F = [B_C; R_C]`` where ``R_C^T R_C = V_C``, and ``r = [x*; 0]``.
        """
        if self.var_big is None:
            raise ValueError("stacked system was built without the variance split")
        idx = self.indices(sel)
        lam, vec = np.linalg.eigh(self.var_big[np.ix_(idx, idx)])
        R = np.sqrt(np.clip(lam, 0.0, None))[:, None] * vec.T
        F = np.vstack([self.mean_big[:, idx], R])
        return F, np.concatenate([self.target, np.zeros(len(idx))])

    def mse(self, sel, u: np.ndarray) -> float:
        if self.var_big is None:
            return self.mse_quadratic(sel, u)
        idx = self.indices(sel)
        u = np.asarray(u, dtype=float)
        bias = self.mean_big[:, idx] @ u - self.target
        return float(bias @ bias + u @ self.var_big[np.ix_(idx, idx)] @ u)

    def mse_quadratic(self, sel, u: np.ndarray) -> float:
        """The expanded quadratic ``alpha - 2 beta_C^T u + u^T Gamma_C u``."""
        G, b = self.restrict(sel)
        return float(self.alpha - 2.0 * b @ u + u @ G @ u)


def _check_undirected(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or not np.allclose(w, w.T, rtol=0, atol=1e-12):
        raise ValueError("exact second moments require an undirected (symmetric) adjacency")
    if np.any(np.diag(w) != 0):
        raise ValueError("adjacency must not have self-loops")
    return w


def q_step_adjacency(q_prev: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """``E[W_t^T Q W_t]`` for RES(p) realizations of the adjacency ``w``."""
    w = _check_undirected(w)
    q = np.asarray(q_prev, dtype=float)
    hadamard = w * q * w
    hadamard -= np.diag(np.diag(hadamard))
    out = (p * p * (w.T @ q @ w)
           + p * (1 - p) * hadamard
           + p * (1 - p) * np.diag(np.diag(w.T @ np.diag(np.diag(q)) @ w)))
    return (out + out.T) / 2


def q_step_laplacian(q_prev: np.ndarray, w: np.ndarray, d: Optional[np.ndarray],
                     eps: float, p: float, printed: bool = False) -> np.ndarray:
    """``E[A_t^T Q A_t]`` for ``A_t = I - eps L_t`` under RES(p).

    With ``L_t = sum_e B_e L_e`` over independent Bernoulli(p) edges,
    ``E[L_t Q L_t] = p^2 L Q L + p(1-p) sum_e L_e Q L_e`` and the edge sum is
    the Laplacian of the weights ``s_ij = w_ij^2 (q_ii + q_jj - 2 q_ij)``.

    ``printed=True`` evaluates the five-term Hadamard expression that is
    commonly quoted for this step instead. It does not agree with the exact
    expectation in general and is kept for comparison only.
    """
    w = _check_undirected(w)
    q = np.asarray(q_prev, dtype=float)
    n = len(w)
    deg = w.sum(axis=1) if d is None else np.diag(np.asarray(d, dtype=float)).copy()
    if printed:
        return _q_step_laplacian_printed(q, w, np.diag(deg), eps, p)
    L = np.diag(deg) - w
    edge_term = _edge_term(w, q)
    lq = L @ q
    out = (q - eps * p * (lq + lq.T)
           + eps * eps * p * p * (lq @ L)
           + eps * eps * p * (1 - p) * edge_term)
    return (out + out.T) / 2 if n else out


def _q_step_laplacian_printed(q, w, D, eps, p):
    n = len(w)
    I = np.eye(n)
    dq = np.diag(np.diag(q))
    h = w.T * q * w
    Dp = I - eps * p * D
    return (eps ** 2 * p ** 2 * (w.T @ q @ w)
            + eps ** 2 * p * (1 - p) * (h - np.diag(np.diag(h)))
            + eps ** 2 * p * (1 - p) * np.diag(np.diag(w.T @ dq @ w))
            + 2 * eps * p * Dp @ np.diag(np.diag(q @ w))
            + (Dp @ Dp + eps ** 2 * p * (1 - p) * (w.T @ w)) * dq)


def q_sequence(model: DiffusionModel, g: Graph, p: float, h: np.ndarray, count: int) -> list:
    """``[Q_0, ..., Q_count]`` with ``Q_0 = H^T H``."""
    model = model.bind(g)
    w = g.adjacency()
    qs = [h.T @ h]
    for _ in range(count):
        if model.kind == ADJACENCY:
            qs.append(q_step_adjacency(qs[-1], w, p))
        else:
            qs.append(q_step_laplacian(qs[-1], w, None, model.eps, p))
    return qs


def _edge_term(w, q):
    """``sum_e w_e^2 L_e Q L_e`` with ``L_e`` the unit Laplacian of edge ``e``."""
    qd = np.diag(q)
    s = (w * w) * (qd[:, None] + qd[None, :] - 2 * q)
    return np.diag(s.sum(axis=1)) - s


def q_covariance(model: DiffusionModel, g: Graph, p: float, q: np.ndarray) -> np.ndarray:
    """``E[A^T Q A] - Abar^T Q Abar``: the part of one step due to link losses.

    Carries an explicit ``p (1 - p)`` factor, so it is exactly zero at ``p = 1``.
    """
    model = model.bind(g)
    w = g.adjacency()
    q = np.asarray(q, dtype=float)
    if model.kind == ADJACENCY:
        hadamard = w * q * w
        hadamard -= np.diag(np.diag(hadamard))
        return p * (1 - p) * (hadamard + np.diag((w * w).T @ np.diag(q)))
    return model.eps ** 2 * p * (1 - p) * _edge_term(w, q)


def variance_sequence(model: DiffusionModel, g: Graph, p: float, h: np.ndarray, count: int) -> list:
    """``[D_0, ..., D_count]`` with ``D_a = Q_a - (Abar^a)^T Q_0 Abar^a``.

    Built from ``D_a = Abar^T D_{a-1} Abar + cov(Q_{a-1})`` so that no
    difference of nearly equal matrices is ever formed.
    """
    abar = mean_transition(model, g, p)
    q = h.T @ h
    d = np.zeros_like(q)
    ds = [d]
    for _ in range(count):
        cov = q_covariance(model, g, p, q)
        q = abar.T @ q @ abar + cov
        d = abar.T @ d @ abar + cov
        d = (d + d.T) / 2
        ds.append(d)
    return ds


def _check_times(T, tau, tau2):
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    if not (0 <= tau < T and 0 <= tau2 < T):
        raise ValueError(f"time indices must lie in [0, {T - 1}]")


def gamma_exact(model: DiffusionModel, g: Graph, p: float, h: np.ndarray,
                T: int, tau: int, tau2: int) -> np.ndarray:
    """One second-moment block ``Gamma[tau, tau2]`` by the exact recursion."""
    _check_times(T, tau, tau2)
    if tau > tau2:
        return gamma_exact(model, g, p, h, T, tau2, tau).T
    q = q_sequence(model, g, p, h, T - tau2 - 1)[-1]
    abar = mean_transition(model, g, p)
    return np.linalg.matrix_power(abar, tau2 - tau).T @ q


def _block_table(seq: list, abar: np.ndarray, T: int) -> np.ndarray:
    """Blocks ``(Abar^{s-t})^T M_{T-s-1}`` for ``t <= s`` and their transposes."""
    n = abar.shape[0]
    powers = [np.eye(n)]
    for _ in range(T - 1):
        powers.append(powers[-1] @ abar)
    out = np.empty((T, T, n, n))
    for t2 in range(T):
        m = seq[T - t2 - 1]
        for t in range(t2 + 1):
            block = powers[t2 - t].T @ m
            out[t, t2] = block
            out[t2, t] = block.T
    return out


def gamma_table(model: DiffusionModel, g: Graph, p: float, h: np.ndarray, T: int) -> np.ndarray:
    """All blocks ``Gamma[t, s]``, shape ``(T, T, N, N)``."""
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    return _block_table(q_sequence(model, g, p, h, T - 1), mean_transition(model, g, p), T)


def variance_table(model: DiffusionModel, g: Graph, p: float, h: np.ndarray, T: int) -> np.ndarray:
    """Variance part of every ``Gamma[t, s]``: ``Gamma[t, s] - B_t^T B_s`` with
    ``B_t = H Abar^{T-t-1}``."""
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    return _block_table(variance_sequence(model, g, p, h, T - 1), mean_transition(model, g, p), T)


def _realizations(model: DiffusionModel, g: Graph, p: float):
    """Every edge subset's transition matrix with its probability."""
    E = g.num_edges
    masks = np.array(list(itertools.product([False, True], repeat=E)), dtype=bool).reshape(-1, E)
    kept = masks.sum(axis=1)
    probs = p ** kept * (1 - p) ** (E - kept)
    return transition_batch(model, g, masks), probs


def gamma_brute_force(model: DiffusionModel, g: Graph, p: float, h: np.ndarray,
                      T: int, tau: int, tau2: int, printed: bool = False) -> np.ndarray:
    """``Gamma[tau, tau2]`` by enumerating every per-step edge subset.

    Independent oracle for :func:`gamma_exact`. ``printed=True`` drops the
    transpose on the first transition product.
    """
    _check_times(T, tau, tau2)
    model = model.bind(g)
    steps = T - 1 - min(tau, tau2)
    if (2 ** g.num_edges) ** steps > MAX_ENUMERATION:
        raise ValueError(f"enumeration of {(2 ** g.num_edges) ** steps} outcomes is too large")
    n = g.n
    q = h.T @ h
    A, probs = _realizations(model, g, p)
    # joint enumeration over steps T-1, T-2, ..., min+1; products built left to right
    phi1 = np.eye(n)[None]
    phi2 = np.eye(n)[None]
    w = np.ones(1)
    for s in range(T - 1, min(tau, tau2), -1):
        S = len(probs)
        phi1 = (phi1[:, None] @ A[None] if s > tau else np.repeat(phi1[:, None], S, 1)).reshape(-1, n, n)
        phi2 = (phi2[:, None] @ A[None] if s > tau2 else np.repeat(phi2[:, None], S, 1)).reshape(-1, n, n)
        w = (w[:, None] * probs[None]).reshape(-1)
    left = phi1 if printed else np.transpose(phi1, (0, 2, 1))
    return np.einsum("r,rij,jk,rkl->il", w, left, q, phi2)


def gamma_monte_carlo(sample_transition: Callable[[np.random.Generator], np.ndarray],
                      h: np.ndarray, T: int, tau: int, tau2: int,
                      n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo estimate of ``Gamma[tau, tau2]`` for an arbitrary i.i.d. transition rule."""
    _check_times(T, tau, tau2)
    n = h.shape[1]
    q = h.T @ h
    acc = np.zeros((n, n))
    for _ in range(n_draws):
        phi1 = np.eye(n)
        phi2 = np.eye(n)
        for s in range(T - 1, min(tau, tau2), -1):
            A = sample_transition(rng)
            if s > tau:
                phi1 = phi1 @ A
            if s > tau2:
                phi2 = phi2 @ A
        acc += phi1.T @ q @ phi2
    return acc / n_draws


def mse_coefficients(model: DiffusionModel, g: Graph, p: float, h: np.ndarray,
                     target: np.ndarray, T: int) -> MseCoefficients:
    """Exact MSE coefficients for filter ``h`` and target ``x* = target``."""
    target = np.asarray(target, dtype=float)
    abar = mean_transition(model, g, p)
    v = h.T @ target
    gain = np.asarray(h, dtype=float)
    beta = np.empty((T, g.n))
    mean_gain = np.empty((T, g.n, g.n))
    for t in range(T - 1, -1, -1):
        beta[t] = v
        mean_gain[t] = gain
        v = abar.T @ v
        gain = gain @ abar
    return MseCoefficients(float(target @ target), beta, gamma_table(model, g, p, h, T),
                           target.copy(), mean_gain, variance_table(model, g, p, h, T))


def _injections(coeffs: MseCoefficients, sel, controls) -> np.ndarray:
    sel = check_selection(sel, coeffs.n)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if controls.shape != (coeffs.T, len(sel)):
        raise ValueError(f"controls must have shape {(coeffs.T, len(sel))}, got {controls.shape}")
    z = np.zeros((coeffs.T, coeffs.n))
    z[:, sel] = controls
    return z


def mse_closed_form(coeffs: MseCoefficients, sel, controls) -> float:
    """Closed-form ``E||H x_T - x*||^2`` for driving nodes ``sel`` and ``(T, M)`` controls."""
    z = _injections(coeffs, sel, controls)
    lin = np.einsum("tn,tn->", coeffs.beta, z)
    quad = np.einsum("tn,tsnm,sm->", z, coeffs.gamma, z)
    return float(coeffs.alpha - 2.0 * lin + quad)


def mse_decomposed(coeffs: MseCoefficients, sel, controls) -> tuple:
    """``(bias, variance)`` with ``bias = ||H mu_T - x*||^2``; their sum is the MSE."""
    z = _injections(coeffs, sel, controls)
    resid = np.einsum("tij,tj->i", coeffs.mean_gain, z) - coeffs.target
    var = np.einsum("tn,tsnm,sm->", z, coeffs.variance, z)
    return float(resid @ resid), float(var)


def mse_upper_bound(rho: float, abar: np.ndarray, h: np.ndarray, target: np.ndarray,
                    sel, controls, exponent: str = "derived",
                    pairing: str = "inner") -> float:
    """Second-moment-free upper bound on the MSE.

    The quadratic term is ``sum_{t,s} rho^e(t, s) <u_s, u_t>``. With
    ``exponent="derived"`` ``e = (T-t-1) + (T-s-1)``, matching the norm
    bound on the two transition products; ``"printed"`` uses ``2(T-s+1)``.

    ``pairing="inner"`` keeps the signed inner products. They
    can be negative, and then the sum is not an upper bound on the
    quadratic term. ``pairing="norms"`` uses ``||u_s|| ||u_t||`` instead,
    which is a valid bound by Cauchy-Schwarz.
    """
    n = abar.shape[0]
    sel = check_selection(sel, n)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    T = controls.shape[0]
    target = np.asarray(target, dtype=float)
    t = np.arange(T)
    if exponent == "derived":
        e = (T - t[:, None] - 1) + (T - t[None, :] - 1)
    elif exponent == "printed":
        e = np.broadcast_to(2 * (T - t[None, :] + 1), (T, T))
    else:
        raise ValueError(f"unknown exponent variant {exponent!r}")
    if pairing == "inner":
        gram = controls @ controls.T
    elif pairing == "norms":
        norms = np.linalg.norm(controls, axis=1)
        gram = np.outer(norms, norms)
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    quad = float(np.sum(float(rho) ** e * gram))
    v = h.T @ target
    lin = 0.0
    for tt in range(T - 1, -1, -1):
        lin += v[sel] @ controls[tt]
        v = abar.T @ v
    return float(target @ target - 2.0 * lin + quad)


def stack(coeffs: MseCoefficients) -> StackedSystem:
    T, n = coeffs.T, coeffs.n
    rev = coeffs.gamma[::-1, ::-1]
    gamma_big = np.transpose(rev, (0, 2, 1, 3)).reshape(T * n, T * n)
    gamma_big = (gamma_big + gamma_big.T) / 2
    beta_big = coeffs.beta[::-1].reshape(-1).copy()
    if coeffs.variance is None:
        return StackedSystem(coeffs.alpha, gamma_big, beta_big, T, n)
    var_big = np.transpose(coeffs.variance[::-1, ::-1], (0, 2, 1, 3)).reshape(T * n, T * n)
    var_big = (var_big + var_big.T) / 2
    mean_big = np.hstack(list(coeffs.mean_gain[::-1]))
    return StackedSystem(coeffs.alpha, gamma_big, beta_big, T, n,
                         coeffs.target, mean_big, var_big)


def mse_empirical(model: DiffusionModel, g: Graph, p: float, h: np.ndarray,
                  target: np.ndarray, sel, controls, n_draws: int,
                  rng: np.random.Generator):
    """Monte Carlo ``(mean, standard error)`` of ``||H x_T - x*||^2``."""
    xT = simulate_final(model, g, p, sel, controls, rng, n_draws)
    err = ((xT @ h.T - np.asarray(target)) ** 2).sum(axis=1)
    se = err.std(ddof=1) / np.sqrt(n_draws) if n_draws > 1 else 0.0
    return float(err.mean()), float(se)
