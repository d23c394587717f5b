"""Brute-force reference solutions for certifying the solver at small scale."""
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import AffinityMatrix, AssignmentMatrix, frobenius_form

MAX_MIQP_SIZE = 10
MAX_QP_LENGTH = 10
EXHAUSTIVE_MWM_LIMIT = 6
_TIE_TOL = 1e-12


def simplex_qp_oracle(v):
    """Simplex projection by enumerating every support pattern.

    On a support T the equality-constrained minimiser is
    ``x_T = v_T - (sum(v_T) - 1) / |T|``; the best nonnegative candidate wins.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if v.ndim != 1 or n == 0:
        raise ValueError("expected a non-empty 1-D vector")
    if n > MAX_QP_LENGTH:
        raise ValueError(f"oracle limited to length <= {MAX_QP_LENGTH}, got {n}")
    codes = np.arange(1, 2 ** n)
    masks = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    size = masks.sum(axis=1)
    shift = ((masks * v).sum(axis=1) - 1.0) / size
    X = np.where(masks, v - shift[:, None], 0.0)
    feasible = np.all(X >= 0.0, axis=1)
    # ||x - v||^2 minus the constant ||v||^2; keeping ||v||^2 would let large
    # entries off the support swamp the differences between candidates
    dist = np.sum(X * X, axis=1) - 2.0 * (X @ v)
    dist[~feasible] = np.inf
    return X[int(np.argmin(dist))]


def restricted_growth_strings(view_ids):
    """Yield set partitions as restricted-growth strings, lexicographically.

    Partitions placing two rows of the same view in one block are skipped.
    """
    view_ids = list(view_ids)
    m = len(view_ids)
    labels = [0] * m
    block_views = []

    def rec(i):
        if i == m:
            yield tuple(labels)
            return
        v = view_ids[i]
        for b, views in enumerate(block_views):
            if v in views:
                continue
            labels[i] = b
            views.add(v)
            yield from rec(i + 1)
            views.discard(v)
        labels[i] = len(block_views)
        block_views.append({v})
        yield from rec(i + 1)
        block_views.pop()

    # the empty set has one partition, the empty string; rec handles that too
    yield from rec(0)


def _assignment_from_labels(labels, m):
    U = np.zeros((m, m))
    U[np.arange(m), labels] = 1.0
    return U


def brute_force_miqp(S: AffinityMatrix, chunk=20000):
    """Global minimiser of ||U U^T - S||_F^2 over all feasible binary U.

    Returns ``(AssignmentMatrix, objective)``.
    """
    m = S.m
    if m > MAX_MIQP_SIZE:
        raise ValueError(f"brute force limited to m <= {MAX_MIQP_SIZE}, got m = {m}")
    ids = S.partition.view_ids
    same_view = (ids[:, None] == ids[None, :]) & ~np.eye(m, dtype=bool)
    Sv = S.values
    best_val, best_labels = np.inf, None
    gen = restricted_growth_strings(ids)
    while True:
        batch = np.array(list(itertools.islice(gen, chunk)), dtype=np.int64)
        if batch.size == 0:
            break
        # for one-hot U, (U U^T)_ab = [label_a == label_b]
        A = batch[:, :, None] == batch[:, None, :]
        if np.any(A & same_view):
            raise AssertionError("enumerator produced a distinctness violation")
        vals = np.sum((A - Sv) ** 2, axis=(1, 2))
        k = int(np.argmin(vals))
        if vals[k] < best_val - _TIE_TOL:
            best_val, best_labels = float(vals[k]), batch[k]
    U = _assignment_from_labels(best_labels, m)
    return AssignmentMatrix(S.partition, U), frobenius_form(U, Sv)


def matching_gain(S_pair, pairs):
    S_pair = np.asarray(S_pair, dtype=float)
    return float(sum(2.0 * S_pair[i, j] - 1.0 for i, j in pairs))


def _exhaustive_mwm(W):
    # W holds gains 2s - 1; only strictly positive edges can help
    m1, m2 = W.shape
    transpose = m1 > m2
    if transpose:
        W = W.T
        m1, m2 = m2, m1
    best = [0.0, ()]

    def rec(i, used, gain, chosen):
        if i == m1:
            if gain > best[0] + _TIE_TOL:
                best[0], best[1] = gain, tuple(chosen)
            return
        rec(i + 1, used, gain, chosen)
        for j in range(m2):
            if j not in used and W[i, j] > 0:
                used.add(j)
                chosen.append((i, j))
                rec(i + 1, used, gain + W[i, j], chosen)
                chosen.pop()
                used.discard(j)

    rec(0, set(), 0.0, [])
    pairs = best[1]
    if transpose:
        pairs = tuple((j, i) for i, j in pairs)
    return set(pairs)


def hungarian_mwm(S_pair):
    """Maximum-weight (imperfect) bipartite matching with gains 2s - 1."""
    S_pair = np.asarray(S_pair, dtype=float)
    if S_pair.ndim != 2:
        raise ValueError("expected a 2-D block of affinities")
    if not np.all(np.isfinite(S_pair)):
        raise ValueError("affinities must be finite")
    if S_pair.size == 0:
        return set()
    W = 2.0 * S_pair - 1.0
    if min(W.shape) <= EXHAUSTIVE_MWM_LIMIT:
        return _exhaustive_mwm(W)
    gains = np.maximum(W, 0.0)
    rows, cols = linear_sum_assignment(gains, maximize=True)
    return {(int(i), int(j)) for i, j in zip(rows, cols) if W[i, j] > 0}


def optimality_gap(f_solution, f_optimum):
    return float(f_solution) - float(f_optimum)
