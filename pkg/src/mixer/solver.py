"""Penalty-continuation projected gradient descent for multiway association.

The relaxed problem

    minimize  <U U^T, C> + d (phi_orth(U) + phi_dist(U))
    over      nonnegative U with unit row sums

with ``C = 1 - 2S`` off the diagonal and ``C_ii = 0`` (see ``relaxed_cost``)

is solved for a sequence of growing penalty weights ``d``.  Each weight is
handled by projected gradient descent with an Armijo backtracking line search;
the penalty matrices are randomly inflated before every solve so the descent
does not stall on non-binary saddles.  The loop stops as soon as an iterate is
binary, column-orthogonal and distinct.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .core import (
    AffinityMatrix,
    AssignmentMatrix,
    PenaltyPair,
    SolverConfig,
    as_array,
    build_penalties,
    cost_matrix,
    frobenius_form,
    objective,
    phi_dist,
    phi_orth,
)
from .projection import project_rows_support, project_simplex


@dataclass
class SolveReport:
    final_objective: float
    miqp_objective: float
    phi_orth_final: float
    phi_dist_final: float
    d_trajectory: list
    outer_iterations: int
    total_inner_iterations: int
    total_backtracks: int
    wall_time: float
    universe_estimate: int
    converged_feasible: bool

    def to_dict(self):
        return {
            "final_objective": self.final_objective,
            "miqp_objective": self.miqp_objective,
            "phi_orth_final": self.phi_orth_final,
            "phi_dist_final": self.phi_dist_final,
            "d_trajectory": list(self.d_trajectory),
            "outer_iterations": self.outer_iterations,
            "total_inner_iterations": self.total_inner_iterations,
            "total_backtracks": self.total_backtracks,
            "wall_time": self.wall_time,
            "universe_estimate": self.universe_estimate,
            "converged_feasible": self.converged_feasible,
        }


@dataclass(frozen=True, eq=False)
class Clustering:
    labels: np.ndarray
    universe_estimate: int


class NotConverged(RuntimeError):
    """No feasible binary point was reached within ``max_outer_iters``.

    Carries the last iterate and a report with ``converged_feasible=False``.
    """

    def __init__(self, message, U=None, report=None):
        super().__init__(message)
        self.U = U
        self.report = report


@dataclass
class _InnerStats:
    iterations: int = 0
    backtracks: int = 0
    stalled: bool = False
    history: list = field(default_factory=list)


def working_affinity(S) -> np.ndarray:
    """``S`` with a neutral (0.5) self-affinity on the diagonal."""
    W = np.array(as_array(S), dtype=float)
    np.fill_diagonal(W, 0.5)
    return W


def relaxed_cost(S) -> np.ndarray:
    """The cost 1 - 2S that the relaxation descends, with a zero diagonal.

    For binary row-stochastic U, diag(U U^T) = 1, so the diagonal of the cost
    only shifts the objective by a constant.  In the relaxation a -1 diagonal
    rewards ||u_i||^2 and pins every row to whichever vertex it reaches
    first; zeroing it leaves the penalty schedule in charge of binarisation.
    The eigenvectors are unaffected (the shift is a multiple of I).
    """
    return cost_matrix(working_affinity(S))


def initialize(S: AffinityMatrix) -> AssignmentMatrix:
    """Project the eigenvector matrix of 1 - 2S (ascending eigenvalues) onto the simplex."""
    Sbar = cost_matrix(S)
    if not np.all(np.isfinite(Sbar)):
        raise np.linalg.LinAlgError("affinity contains non-finite entries")
    _, V = np.linalg.eigh(Sbar)
    # eigh fixes no sign; make each column's largest-magnitude entry positive
    # (first one on ties) so the projection keeps the dominant rows
    peak = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
    sign = np.where(peak < 0, -1.0, 1.0)
    return AssignmentMatrix(S.partition, project_simplex(V * sign))


def init_penalty_weight(U, S, P: PenaltyPair) -> float:
    """Median of the weights at which each problematic entry starts to shrink."""
    U = as_array(U)
    Sbar = cost_matrix(S)
    G = U @ P.p_orth + P.p_dist @ U
    mask = (G > 0) & (U > 0)
    if not mask.any():
        return 1.0
    d = float(np.median(-Sbar[mask] / G[mask]))
    return max(d, 0.0)


def perturb_penalties(P: PenaltyPair, scale: float, rng: np.random.Generator) -> PenaltyPair:
    """Inflate each nonzero penalty entry by a factor drawn from [1, 1 + scale]."""
    if scale < 0:
        raise ValueError("perturbation scale must be >= 0")

    def bump(M):
        N = np.triu(rng.uniform(0.0, scale, size=M.shape), 1)
        return M * (1.0 + N + N.T)

    return PenaltyPair(bump(P.p_orth), bump(P.p_dist))


# iterates sparser than this are multiplied in CSR form
_SPARSE_DENSITY = 0.05


def _pgd(U, Sbar, d, P, cfg, history=None):
    # iterates are carried as (rows, cols, vals) of their positive entries;
    # they turn sparse within a few steps, which keeps each step near O(m^2)
    A = Sbar + d * P.p_dist
    Po = P.p_orth
    m = U.shape[0]

    def evaluate(sup):
        r, c, v = sup
        if v.size < _SPARSE_DENSITY * m * m:
            indptr = np.concatenate(([0], np.cumsum(np.bincount(r, minlength=m))))
            Xs = csr_matrix((v, c, indptr), shape=(m, m))
            # A and Po are symmetric, so (X^T A)^T = A X
            H = (Xs.T @ A).T + d * (Xs @ Po)
        else:
            X = np.zeros((m, m))
            X[r, c] = v
            H = A @ X + d * (X @ Po)
        return float(np.dot(H[r, c], v)), 2.0 * H

    rows, cols = np.nonzero(U)
    sup = (rows, cols, U[rows, cols])
    stats = _InnerStats()
    F, g = evaluate(sup)
    if not np.isfinite(F):
        raise FloatingPointError("objective is not finite at the starting point")
    if history is not None:
        history.append(F)
    for _ in range(cfg.max_inner_iters):
        r, c, v = sup
        g_at_u = np.dot(g[r, c], v)
        alpha = cfg.initial_step
        for _ in range(cfg.max_backtracks):
            Y = -alpha * g
            Y[r, c] += v
            new = project_rows_support(Y)
            Fn, gn = evaluate(new)
            if not np.isfinite(Fn):
                raise FloatingPointError("objective became non-finite")
            # <g, U+ - U> over the two supports
            slope = np.dot(g[new[0], new[1]], new[2]) - g_at_u
            if Fn <= F + cfg.armijo_c * slope:
                break
            alpha *= cfg.armijo_shrink
            stats.backtracks += 1
        else:
            stats.stalled = True
            break
        stats.iterations += 1
        decrease = F - Fn
        scale = max(1.0, abs(F))
        sup, F, g = new, Fn, gn
        if history is not None:
            history.append(F)
        if decrease < cfg.inner_tol * scale:
            break
    out = np.zeros((m, m))
    out[sup[0], sup[1]] = sup[2]
    return out, stats


def escape_saddle(U, Sbar, d, P: PenaltyPair, tol: float = 1e-6):
    """Snap non-binary rows to their largest entry whenever that lowers F.

    At a stationary point the gradient is constant on each row's support, so
    moving a row's mass between two support columns j, k changes F only at
    second order, by ``d * delta^T P_o delta < 0`` (the diagonal of the relaxed
    cost and of P_d are zero).  Such column-swap saddles are invariant under a
    symmetric perturbation of P, so they need this explicit step.
    Returns the new iterate and the number of rows moved.
    """
    U = np.array(U, dtype=float)
    A = Sbar + d * P.p_dist
    Po = P.p_orth
    g = 2.0 * (A @ U + d * (U @ Po))
    moved = 0
    for i in np.flatnonzero(U.max(axis=1) < 1.0 - tol):
        v = np.zeros(U.shape[1])
        v[int(np.argmax(U[i]))] = 1.0
        delta = v - U[i]
        change = g[i] @ delta + A[i, i] * (delta @ delta) + d * (delta @ Po @ delta)
        if change < 0.0:
            U[i] = v
            # rank-one refresh of the gradient
            g += 2.0 * np.outer(A[:, i], delta)
            g[i] += 2.0 * d * (Po @ delta)
            moved += 1
    return U, moved


def pgd_inner(U, S, d: float, P: PenaltyPair, cfg: SolverConfig = SolverConfig(), history=None):
    """Projected gradient descent on the relaxed objective at a fixed weight ``d``.

    ``history``, when given, receives the objective of every accepted iterate.
    """
    if d < 0:
        raise ValueError(f"penalty weight must be >= 0, got {d}")
    partition = U.partition if isinstance(U, AssignmentMatrix) else None
    out, _ = _pgd(as_array(U), relaxed_cost(S), float(d), P, cfg, history)
    if partition is None:
        return out
    return AssignmentMatrix(partition, out)


def _is_feasible(U, P, eps):
    if not np.all(np.minimum(np.abs(U), np.abs(U - 1.0)) <= eps):
        return False
    if not np.all(np.abs(U.sum(axis=1) - 1.0) <= eps):
        return False
    return phi_orth(U, P) <= eps and phi_dist(U, P) <= eps


def is_feasible(U: AssignmentMatrix, eps: float = 0.0) -> bool:
    """Binary, row-stochastic, orthogonal and distinct, all within ``eps``."""
    return _is_feasible(U.values, build_penalties(U.partition), eps)


def extract_clusters(U) -> Clustering:
    """Label rows by their nonzero column, numbering columns by first use."""
    U = as_array(U)
    if not np.all((U == 0.0) | (U == 1.0)) or not np.all(U.sum(axis=1) == 1.0):
        raise ValueError("cluster extraction needs a binary matrix with unit row sums")
    cols = np.argmax(U, axis=1)
    remap = {}
    labels = np.empty(len(cols), dtype=np.int64)
    for r, c in enumerate(cols):
        labels[r] = remap.setdefault(int(c), len(remap))
    return Clustering(labels, len(remap))


def _snap(U, tol):
    U = U.copy()
    U[np.abs(U) <= tol] = 0.0
    U[np.abs(U - 1.0) <= tol] = 1.0
    return U


def _next_weight(d, m):
    nxt = 2.0 * d if d > 0 else 1.0
    # land on the threshold once so one solve is guaranteed to run there
    if d < m + 1 < nxt:
        nxt = float(m + 1)
    return nxt


def solve(S: AffinityMatrix, cfg: SolverConfig = SolverConfig()):
    """Fuse the affinity ``S`` into a binary, cycle-consistent, distinct assignment.

    Returns ``(AssignmentMatrix, Clustering, SolveReport)``; raises
    ``NotConverged`` when ``cfg.max_outer_iters`` weights were tried without
    reaching a feasible point.
    """
    t0 = time.perf_counter()
    m = S.m
    P = build_penalties(S.partition)
    Sbar = relaxed_cost(S)
    rng = np.random.default_rng(cfg.rng_seed)

    U = initialize(S).values
    d = init_penalty_weight(U, S, P)
    d_traj = []
    inner = backtracks = 0
    for outer in range(1, cfg.max_outer_iters + 1):
        Pp = perturb_penalties(P, cfg.perturb_scale, rng)
        U, stats = _pgd(U, Sbar, d, Pp, cfg)
        inner += stats.iterations
        backtracks += stats.backtracks
        d_traj.append(d)
        if d >= m + 1 and not _is_feasible(U, P, cfg.binary_tol):
            # past the threshold every non-binary stationary point is a saddle
            U, _ = escape_saddle(U, Sbar, d, Pp, cfg.binary_tol)
        if _is_feasible(U, P, cfg.binary_tol):
            Us = _snap(U, cfg.binary_tol)
            po, pd = phi_orth(Us, P), phi_dist(Us, P)
            exact = (
                np.all((Us == 0.0) | (Us == 1.0))
                and np.all(Us.sum(axis=1) == 1.0)
                and po == 0.0
                and pd == 0.0
            )
            if exact:
                clusters = extract_clusters(Us)
                report = SolveReport(
                    final_objective=objective(Us, S, d, P),
                    miqp_objective=frobenius_form(Us, S),
                    phi_orth_final=po,
                    phi_dist_final=pd,
                    d_trajectory=d_traj,
                    outer_iterations=outer,
                    total_inner_iterations=inner,
                    total_backtracks=backtracks,
                    wall_time=time.perf_counter() - t0,
                    universe_estimate=clusters.universe_estimate,
                    converged_feasible=True,
                )
                return AssignmentMatrix(S.partition, Us), clusters, report
        d = _next_weight(d, m)

    po, pd = phi_orth(U, P), phi_dist(U, P)
    report = SolveReport(
        final_objective=objective(U, S, d_traj[-1], P),
        miqp_objective=frobenius_form(U, S),
        phi_orth_final=po,
        phi_dist_final=pd,
        d_trajectory=d_traj,
        outer_iterations=cfg.max_outer_iters,
        total_inner_iterations=inner,
        total_backtracks=backtracks,
        wall_time=time.perf_counter() - t0,
        universe_estimate=int(np.count_nonzero(U.sum(axis=0) > cfg.binary_tol)),
        converged_feasible=False,
    )
    raise NotConverged(
        f"no feasible binary point after {cfg.max_outer_iters} penalty weights "
        f"(phi_orth={po:.3g}, phi_dist={pd:.3g})",
        U=U,
        report=report,
    )
