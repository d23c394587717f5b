"""Euclidean projection onto the standard simplex, row by row.

``project_row_simplex`` / ``project_simplex`` use sort-and-threshold.  The
solver calls ``project_rows_support``, which finds the same threshold by a
sort-free fixed point and returns only the support; its iterates are sparse
after a few steps, where that is several times cheaper than sorting every row.
Both are accurate while |entries| stay well below 1 / machine epsilon.
"""
import numpy as np


def _project_rows(Y):
    # sort-and-threshold; stable sort fixes tie order bit-for-bit
    n, m = Y.shape
    order = np.argsort(-Y, axis=1, kind="stable")
    u = np.take_along_axis(Y, order, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    j = np.arange(1, m + 1)
    active = u - css / j > 0
    # rho = largest active j; j = 1 is always active
    rho = m - np.argmax(active[:, ::-1], axis=1)
    theta = css[np.arange(n), rho - 1] / rho
    return np.maximum(Y - theta[:, None], 0.0)


def project_row_simplex(v):
    """argmin_{x >= 0, sum(x) = 1} ||x - v||_2 for a single vector ``v``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite vector")
    return _project_rows(v[None, :])[0]


def project_simplex(M):
    """Project every row of ``M`` onto the simplex independently.

    Returns a plain array; wrap it in ``AssignmentMatrix`` when a partition is
    at hand.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("cannot project a non-finite matrix")
    if M.size == 0:
        return M.copy()
    return _project_rows(M)


def project_rows_support(Y):
    """Row-wise simplex projection of a finite 2-D ``Y`` in support form.

    Returns ``(rows, cols, vals)``: the strictly positive entries of the
    projection in row-major order.
    """
    # Michelot's fixed point: theta = (sum of entries above theta - 1) / count.
    # Started from a lower bound, theta only grows and the active set only
    # shrinks, so this ends after at most m passes with the exact threshold.
    # max - 1 and the all-active value are both lower bounds; entries at or
    # below either can never be active.
    n, m = Y.shape
    top = Y.max(axis=1)
    theta = np.maximum(top - 1.0, (Y.sum(axis=1) - 1.0) / m)
    rows, cols = np.nonzero((Y > theta[:, None]) | (Y == top[:, None]))
    vals = Y[rows, cols]
    while True:
        count = np.bincount(rows, minlength=n)
        theta = (np.bincount(rows, vals, minlength=n) - 1.0) / count
        # theta < max in exact arithmetic; pinning the maximum keeps rounding
        # on huge inputs from emptying a row
        keep = (vals > theta[rows]) | (vals == top[rows])
        if keep.all():
            break
        # dropped entries are never re-admitted, which also rules out
        # rounding cycles
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    return rows, cols, vals - theta[rows]
