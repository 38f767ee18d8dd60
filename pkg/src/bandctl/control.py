"""Mean bandwidth controllability, controllers and driving-node selection.

Stacked control vectors follow ``u = [u_{T-1}; ...; u_0]`` throughout, so
column block ``b`` of the in-band controllability matrix multiplies
``u_{T-1-b}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import DiffusionModel, check_selection, mean_spectrum, unstack_controls
from .gsp import BandSpec, Graph, SpectralBasis
from .mse import StackedSystem

RANK_RTOL = 1e-12
COND_MAX = 1e12
STATIONARITY_TOL = 1e-8
MAX_COMBINATIONS = 10 ** 6
# relative margin below which two candidate MSEs count as a tie
TIE_RTOL = 1e-12


class InfeasibleError(ValueError):
    """No controller or selection satisfies the requested constraints."""


@dataclass(frozen=True, eq=False)
class InbandSystem:
    """Mean system restricted to the active band.

    ``a_k`` are the in-band eigenvalues of ``E[A_t]``, ``v_k`` the matching
    ``N x K`` eigenvector block and ``target`` the desired in-band GFT.
    """

    a_k: np.ndarray
    v_k: np.ndarray
    target: np.ndarray

    @property
    def k(self) -> int:
        return len(self.a_k)

    @property
    def n(self) -> int:
        return self.v_k.shape[0]


@dataclass(frozen=True, eq=False)
class ControlPlan:
    selection: tuple
    controls: np.ndarray  # (T, M), row t is u_t
    predicted_mse: float
    biased: bool

    @property
    def T(self) -> int:
        return self.controls.shape[0]

    def to_dict(self) -> dict:
        return {
            "selection": [int(s) for s in self.selection],
            "controls": self.controls.tolist(),
            "predicted_mse": float(self.predicted_mse),
            "biased": bool(self.biased),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlPlan":
        return cls(tuple(int(s) for s in d["selection"]),
                   np.atleast_2d(np.asarray(d["controls"], dtype=float)),
                   float(d["predicted_mse"]), bool(d["biased"]))


def inband_system(model: DiffusionModel, g: Graph, p: float,
                  basis: SpectralBasis, band: BandSpec) -> InbandSystem:
    idx = band.indices(basis.n)
    a = mean_spectrum(model, g, p, basis.eigenvalues)
    return InbandSystem(a[idx], basis.eigenvectors[:, idx], band.coefficients)


def numerical_rank(A: np.ndarray) -> int:
    """Rank with threshold ``sigma_max * max(shape) * 1e-12``."""
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * max(A.shape) * RANK_RTOL))


def _lstsq(A, b):
    rcond = max(A.shape) * RANK_RTOL
    return np.linalg.lstsq(A, b, rcond=rcond)[0]


def inband_controllability_matrix(sys: InbandSystem, sel, T: int) -> np.ndarray:
    """``[I, A_K, ..., A_K^{T-1}] (I_T kron V_K^T C^T)``, shape ``(K, T M)``."""
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    sel = check_selection(sel, sys.n)
    block = sys.v_k[sel].T
    powers = sys.a_k[None, :] ** np.arange(T)[:, None]
    return np.hstack([powers[b][:, None] * block for b in range(T)])


def controllability_rank(sys: InbandSystem, sel, T: int) -> int:
    """Numerical rank of the in-band controllability matrix.

    Powers of ``A_K`` are replaced by Chebyshev polynomials of ``A_K`` mapped
    onto the in-band spectrum interval. Both families span the same
    polynomials of degree < T, so the rank is unchanged, but the Chebyshev
    version stays well conditioned when the in-band eigenvalues cluster
    (e.g. all close to 1 for heat diffusion).
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    sel = check_selection(sel, sys.n)
    block = sys.v_k[sel].T
    lo, hi = float(np.min(sys.a_k)), float(np.max(sys.a_k))
    if hi - lo <= 1e-14 * max(1.0, abs(hi)):
        return numerical_rank(block)
    x = (2.0 * sys.a_k - (hi + lo)) / (hi - lo)
    cheb = [np.ones_like(x), x]
    while len(cheb) < T:
        cheb.append(2.0 * x * cheb[-1] - cheb[-2])
    return numerical_rank(np.hstack([c[:, None] * block for c in cheb[:T]]))


def rank_bound(k: int, T: int, m: int) -> int:
    return min(k, T * min(k, m))


def necessary_nodes(k: int, T: int) -> int:
    """Fewest driving nodes that can control ``k`` frequencies in ``T`` steps."""
    if k < 1 or T < 1:
        raise ValueError("K and T must be at least 1")
    return math.ceil(k / T)


def sufficient_selection(v_k: np.ndarray, M: int) -> tuple:
    """Greedily pick ``M`` rows of ``v_k`` spanning all ``K`` columns.

    Each step adds the row that maximizes the smallest singular value of the
    selected block; ties go to the lowest index.
    """
    n, k = v_k.shape
    if M < k:
        raise ValueError(f"need M >= K, got M={M}, K={k}")
    if M > n:
        raise ValueError(f"cannot select M={M} of {n} nodes")
    chosen = []
    for _ in range(M):
        best, best_score = None, -np.inf
        for r in range(n):
            if r in chosen:
                continue
            s = np.linalg.svd(v_k[chosen + [r]], compute_uv=False)
            score = s[min(len(chosen) + 1, k) - 1]
            if score > best_score * (1 + TIE_RTOL) + 1e-300:
                best, best_score = r, score
        chosen.append(best)
    if numerical_rank(v_k[chosen]) < k:
        raise InfeasibleError("no selection of rows of V_K reaches rank K on this graph and band")
    return tuple(chosen)


def min_energy_control(omega: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``omega u = target`` (stacked ``u``).

    Exact when ``omega`` has full row rank; the least-squares solution when
    it has full column rank.
    """
    omega = np.atleast_2d(omega)
    r = numerical_rank(omega)
    if r != omega.shape[0] and r != omega.shape[1]:
        raise InfeasibleError(f"in-band controllability matrix has rank {r}, "
                              f"neither K={omega.shape[0]} nor TM={omega.shape[1]}")
    return _lstsq(omega, np.asarray(target, dtype=float))


def _factor_or_none(stacked: StackedSystem, sel):
    # systems assembled by hand may lack the bias/variance split
    return stacked.factor(sel) if stacked.var_big is not None else (None, None)


def biased_control(stacked: StackedSystem, sel, strict: bool = False) -> np.ndarray:
    """Stacked ``u`` minimizing the MSE for fixed driving nodes: ``Gamma_C u = beta_C``.

    Solved as the least-squares problem ``min ||F u - r||`` on the factor
    ``Gamma_C = F^T F`` (see :meth:`StackedSystem.factor`), which keeps the
    conditioning of ``F`` instead of squaring it. The minimum-norm solution
    stays well defined when ``Gamma_C`` is singular (e.g. a deterministic
    graph, ``p = 1``); directions below the rank threshold are dropped.
    ``strict=True`` instead demands a condition number of at most 1e12 and
    checks stationarity ``||Gamma_C u - beta_C|| <= 1e-8``.
    """
    G, b = stacked.restrict(sel)
    if strict and np.linalg.cond(G) > COND_MAX:
        raise InfeasibleError("Gamma_C is singular or ill-conditioned")
    F, r = _factor_or_none(stacked, sel)
    u = _lstsq(F, r) if F is not None else _lstsq(G, b)
    if strict and np.linalg.norm(G @ u - b) > STATIONARITY_TOL * max(1.0, np.linalg.norm(b)):
        raise InfeasibleError("no stationary point of the MSE for this selection")
    return u


def unbiased_mse_control(sys: InbandSystem, stacked: StackedSystem, sel) -> np.ndarray:
    """Stacked ``u`` with the lowest MSE among all unbiased inputs for ``sel``."""
    omega = inband_controllability_matrix(sys, sel, stacked.T)
    if controllability_rank(sys, sel, stacked.T) != sys.k:
        raise InfeasibleError("selection cannot reach the target band in the mean")
    u0 = _lstsq(omega, sys.target)
    _, s, vt = np.linalg.svd(omega)
    null = vt[np.sum(s > s[0] * max(omega.shape) * RANK_RTOL):].T
    if null.shape[1] == 0:
        return u0
    F, r = _factor_or_none(stacked, sel)
    if F is None:
        G, b = stacked.restrict(sel)
        return u0 + null @ _lstsq(null.T @ G @ null, null.T @ (b - G @ u0))
    return u0 + null @ _lstsq(F @ null, r - F @ u0)


# -- objectives: sel -> stacked u, or None when the selection fails the rank gate

def unbiased_objective(sys: InbandSystem, T: int) -> Callable:
    def evaluate(sel):
        if controllability_rank(sys, sel, T) != rank_bound(sys.k, T, len(sel)):
            return None
        return _lstsq(inband_controllability_matrix(sys, sel, T), sys.target)
    return evaluate


def unbiased_mse_objective(sys: InbandSystem, stacked: StackedSystem) -> Callable:
    def evaluate(sel):
        try:
            return unbiased_mse_control(sys, stacked, sel)
        except InfeasibleError:
            return None
    return evaluate


def biased_objective(stacked: StackedSystem, rank_gate: bool = False) -> Callable:
    """Biased controller for any selection.

    The minimum-norm minimizer always exists because ``beta_C`` lies in the
    range of ``Gamma_C``. ``rank_gate=True`` additionally demands
    ``rank(Gamma_C) >= m T`` before accepting a selection.
    """
    def evaluate(sel):
        if rank_gate:
            F, _ = _factor_or_none(stacked, sel)
            rank = numerical_rank(F if F is not None else stacked.restrict(sel)[0])
            if rank < len(sel) * stacked.T:
                return None
        try:
            return biased_control(stacked, sel)
        except InfeasibleError:
            return None
    return evaluate


def _better(mse: float, best: float) -> bool:
    if not np.isfinite(best):
        return bool(np.isfinite(mse))
    return mse < best - TIE_RTOL * max(1.0, abs(best))


def _plan(stacked: StackedSystem, sel, u, biased: bool) -> ControlPlan:
    return ControlPlan(tuple(int(s) for s in sel), unstack_controls(u, stacked.T),
                       stacked.mse(sel, u), biased)


def greedy_select(M: int, stacked: StackedSystem, evaluate: Callable, biased: bool) -> ControlPlan:
    """Grow the driving set one node at a time, keeping the lowest-MSE candidate.

    Candidates are scanned in ascending index order; only those passing
    ``evaluate``'s rank gate compete. A round with no admissible candidate
    raises :class:`InfeasibleError`.
    """
    n = stacked.n
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= N={n}, got M={M}")
    chosen: list = []
    best_u = None
    for m in range(1, M + 1):
        best_node, best_mse, best_u = None, np.inf, None
        for r in range(n):
            if r in chosen:
                continue
            sel = chosen + [r]
            u = evaluate(sel)
            if u is None:
                continue
            mse = stacked.mse(sel, u)
            if _better(mse, best_mse):
                best_node, best_mse, best_u = r, mse, u
        if best_node is None:
            raise InfeasibleError(f"no candidate passes the rank gate when adding node {m} of {M}")
        chosen.append(best_node)
    return _plan(stacked, chosen, best_u, biased)


def greedy_select_unbiased(M: int, T: int, sys: InbandSystem, stacked: StackedSystem) -> ControlPlan:
    """Constrained greedy selection with the unbiased minimum-energy controller."""
    if T != stacked.T:
        raise ValueError("horizon does not match the MSE coefficients")
    if M < necessary_nodes(sys.k, T):
        raise InfeasibleError(f"M={M} < ceil(K/T)={necessary_nodes(sys.k, T)} driving nodes")
    return greedy_select(M, stacked, unbiased_objective(sys, T), biased=False)


def greedy_select_biased(M: int, T: int, stacked: StackedSystem,
                         rank_gate: bool = False) -> ControlPlan:
    """Greedy selection with the MSE-minimizing (biased) controller.

    See :func:`biased_objective` for ``rank_gate``.
    """
    if T != stacked.T:
        raise ValueError("horizon does not match the MSE coefficients")
    return greedy_select(M, stacked, biased_objective(stacked, rank_gate), biased=True)


def exhaustive_select(M: int, stacked: StackedSystem, evaluate: Callable,
                      biased: bool) -> ControlPlan:
    """Best selection over all ``C(N, M)`` subsets for the controller in ``evaluate``."""
    n = stacked.n
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= N={n}, got M={M}")
    if math.comb(n, M) > MAX_COMBINATIONS:
        raise ValueError(f"C({n}, {M}) = {math.comb(n, M)} selections is too many to enumerate")
    best_sel, best_u, best_mse = None, None, np.inf
    for sel in itertools.combinations(range(n), M):
        u = evaluate(list(sel))
        if u is None:
            continue
        mse = stacked.mse(sel, u)
        if _better(mse, best_mse):
            best_sel, best_u, best_mse = sel, u, mse
    if best_sel is None:
        raise InfeasibleError(f"no feasible selection of {M} nodes")
    return _plan(stacked, best_sel, best_u, biased)


def random_select(n: int, M: int, rng: np.random.Generator) -> tuple:
    """``M`` distinct nodes uniformly at random (sorted)."""
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= N={n}, got M={M}")
    return tuple(int(i) for i in np.sort(rng.choice(n, size=M, replace=False)))


def plan_for_selection(sel: Sequence[int], stacked: StackedSystem, evaluate: Callable,
                       biased: bool) -> ControlPlan:
    u = evaluate(list(sel))
    if u is None:
        raise InfeasibleError(f"selection {tuple(sel)} fails the controller's rank gate")
    return _plan(stacked, sel, u, biased)


def deterministic_baseline(M: int, T: int, sys_p1: InbandSystem,
                           stacked_p1: StackedSystem) -> ControlPlan:
    """Unbiased greedy design that ignores link losses (inputs built with ``p = 1``)."""
    return greedy_select_unbiased(M, T, sys_p1, stacked_p1)
