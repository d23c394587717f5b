"""Domain types, penalty matrices and the relaxed objective.

Matrices are dense ``numpy`` arrays.  The value types below freeze their
arrays (``writeable = False``) so they can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# absolute tolerance for symmetrising / clamping text-serialised inputs
AFFINITY_TOL = 1e-9
ROW_SUM_TOL = 1e-9


class DimensionError(ValueError):
    pass


class AffinityError(ValueError):
    """Raised when a raw matrix cannot be accepted as an affinity matrix.

    ``index`` holds the offending (row, col) pair when there is one.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ViewPartition:
    """Cardinalities m_1..m_n splitting the m observation rows into views."""

    cardinalities: tuple

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cardinalities)
        if not cards:
            raise ValueError("partition needs at least one view")
        for i, c in enumerate(cards):
            if c < 1:
                raise ValueError(f"view {i} has cardinality {c}; every view needs >= 1 row")
        object.__setattr__(self, "cardinalities", cards)

    @property
    def num_views(self) -> int:
        return len(self.cardinalities)

    @property
    def m(self) -> int:
        return sum(self.cardinalities)

    @property
    def offsets(self) -> tuple:
        out, acc = [], 0
        for c in self.cardinalities:
            out.append(acc)
            acc += c
        return tuple(out)

    @property
    def view_ids(self) -> np.ndarray:
        """View index of every row."""
        return np.repeat(np.arange(self.num_views), self.cardinalities)

    def view_slice(self, i: int) -> slice:
        start = self.offsets[i]
        return slice(start, start + self.cardinalities[i])


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    partition: ViewPartition
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        m = self.partition.m
        if v.shape != (m, m):
            raise DimensionError(f"affinity is {v.shape}, partition implies ({m}, {m})")
        if not np.array_equal(v, v.T):
            raise AffinityError("affinity matrix is not exactly symmetric")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise AffinityError("affinity entries must lie in [0, 1]")
        if not np.all(np.diag(v) == 1.0):
            raise AffinityError("affinity diagonal must be 1")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.partition.m


@dataclass(frozen=True, eq=False)
class AssignmentMatrix:
    """Nonnegative row-stochastic m x m matrix; binary once the solver is done."""

    partition: ViewPartition
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        m = self.partition.m
        if v.shape != (m, m):
            raise DimensionError(f"assignment is {v.shape}, partition implies ({m}, {m})")
        if v.size and v.min() < 0.0:
            raise ValueError("assignment entries must be nonnegative")
        bad = np.flatnonzero(np.abs(v.sum(axis=1) - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise ValueError(f"row {bad[0]} of assignment does not sum to 1")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class PenaltyPair:
    p_orth: np.ndarray
    p_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_orth", _frozen(self.p_orth))
        object.__setattr__(self, "p_dist", _frozen(self.p_dist))
        if self.p_orth.shape != self.p_dist.shape:
            raise DimensionError("penalty matrices differ in shape")


@dataclass(frozen=True)
class SolverConfig:
    inner_tol: float = 1e-9
    max_inner_iters: int = 2000
    max_outer_iters: int = 40
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 60
    initial_step: float = 1.0
    perturb_scale: float = 0.1
    binary_tol: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("inner_tol", "initial_step", "binary_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must be in (0, 1)")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must be in (0, 1)")
        if self.perturb_scale < 0:
            raise ValueError("perturb_scale must be >= 0")
        for name in ("max_inner_iters", "max_outer_iters", "max_backtracks"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


MatrixLike = Union[np.ndarray, AssignmentMatrix, AffinityMatrix, Sequence]


def as_array(x) -> np.ndarray:
    if isinstance(x, (AssignmentMatrix, AffinityMatrix)):
        return x.values
    return np.asarray(x, dtype=float)


def _check_square(*arrays):
    shape = arrays[0].shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {shape}")
    for a in arrays[1:]:
        if a.shape != shape:
            raise DimensionError(f"shape mismatch: {a.shape} vs {shape}")


def build_penalties(partition: ViewPartition) -> PenaltyPair:
    m = partition.m
    p_orth = np.ones((m, m)) - np.eye(m)
    ids = partition.view_ids
    p_dist = (ids[:, None] == ids[None, :]).astype(float) - np.eye(m)
    return PenaltyPair(p_orth, p_dist)


def phi_orth(U: MatrixLike, P: PenaltyPair) -> float:
    """<U^T U, P_o>: zero exactly when the columns of U are orthogonal."""
    U = as_array(U)
    _check_square(U, P.p_orth)
    return float(np.sum((U @ P.p_orth) * U))


def phi_dist(U: MatrixLike, P: PenaltyPair) -> float:
    """<U U^T, P_d>: penalises two same-view rows sharing a column."""
    U = as_array(U)
    _check_square(U, P.p_dist)
    return float(np.sum((P.p_dist @ U) * U))


def cost_matrix(S: MatrixLike) -> np.ndarray:
    """The modified affinity 1 - 2S."""
    return 1.0 - 2.0 * as_array(S)


def objective(U: MatrixLike, S: MatrixLike, d: float, P: PenaltyPair) -> float:
    U, S = as_array(U), as_array(S)
    _check_square(U, S, P.p_orth)
    if d < 0:
        raise ValueError(f"penalty weight must be >= 0, got {d}")
    data = float(np.sum((cost_matrix(S) @ U) * U))
    return data + d * (phi_orth(U, P) + phi_dist(U, P))


def gradient(U: MatrixLike, S: MatrixLike, d: float, P: PenaltyPair) -> np.ndarray:
    U, S = as_array(U), as_array(S)
    _check_square(U, S, P.p_orth)
    if d < 0:
        raise ValueError(f"penalty weight must be >= 0, got {d}")
    return 2.0 * (cost_matrix(S) @ U) + 2.0 * d * (U @ P.p_orth + P.p_dist @ U)


def frobenius_form(U: MatrixLike, S: MatrixLike) -> float:
    """||U U^T - S||_F^2, the original mixed-integer objective."""
    U, S = as_array(U), as_array(S)
    _check_square(U, S)
    R = U @ U.T - S
    return float(np.sum(R * R))


def validate_affinity(values, partition: ViewPartition, tol: float = AFFINITY_TOL) -> AffinityMatrix:
    M = np.array(values, dtype=float)
    m = partition.m
    if M.ndim != 2 or M.shape != (m, m):
        raise DimensionError(f"affinity has shape {M.shape}, views {list(partition.cardinalities)} need ({m}, {m})")
    bad = np.argwhere(~np.isfinite(M))
    if bad.size:
        i, j = map(int, bad[0])
        raise AffinityError(f"non-finite entry at ({i},{j})", (i, j))
    asym = np.argwhere(np.triu(np.abs(M - M.T) > tol))
    if asym.size:
        i, j = map(int, asym[0])
        raise AffinityError(f"asymmetry at ({i},{j}): {M[i, j]!r} vs {M[j, i]!r}", (i, j))
    out = np.argwhere((M < -tol) | (M > 1.0 + tol))
    if out.size:
        i, j = map(int, out[0])
        raise AffinityError(f"entry out of [0,1] at ({i},{j}): {M[i, j]!r}", (i, j))
    M = np.clip(0.5 * (M + M.T), 0.0, 1.0)
    np.fill_diagonal(M, 1.0)
    return AffinityMatrix(partition, M)


def combine_affinities(matrices: Sequence[AffinityMatrix], weights: Sequence[float]) -> AffinityMatrix:
    """Entrywise weighted mean of several attribute affinities."""
    if not matrices:
        raise ValueError("need at least one affinity matrix")
    if len(weights) != len(matrices):
        raise ValueError(f"{len(matrices)} matrices but {len(weights)} weights")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    partition = matrices[0].partition
    for k, A in enumerate(matrices[1:], start=1):
        if A.partition != partition:
            raise DimensionError(f"matrix {k} has views {A.partition.cardinalities}, expected {partition.cardinalities}")
    acc = np.zeros_like(matrices[0].values)
    for wk, A in zip(w, matrices):
        acc += wk * A.values
    acc /= total
    return validate_affinity(acc, partition)
