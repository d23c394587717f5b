"""Synthetic instances, pairwise accuracy metrics, a naive baseline and sweeps."""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import AffinityMatrix, SolverConfig, ViewPartition, frobenius_form, validate_affinity
from .oracles import MAX_MIQP_SIZE, brute_force_miqp, optimality_gap
from .solver import NotConverged, solve


@dataclass(frozen=True)
class SyntheticSpec:
    universe_size: int
    num_views: int
    obs_prob: float
    mismatch: float
    rng_seed: int = 0

    def __post_init__(self):
        if self.universe_size < 1:
            raise ValueError("universe_size must be >= 1")
        if self.num_views < 2:
            raise ValueError("num_views must be >= 2")
        if not 0.0 <= self.obs_prob <= 1.0:
            raise ValueError("obs_prob must be in [0, 1]")
        if not 0.0 <= self.mismatch <= 1.0:
            raise ValueError("mismatch must be in [0, 1]")


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    num_predicted_pairs: int
    num_true_pairs: int
    num_correct_pairs: int
    # set when there were no predicted pairs and precision fell back to 0
    precision_undefined: bool = False

    def to_dict(self):
        return asdict(self)


def add_uncertainty(a, theta):
    """Blend a binary association toward 0.5: (1 - theta) a + theta / 2."""
    a_arr = np.asarray(a, dtype=float)
    t_arr = np.asarray(theta, dtype=float)
    if not np.all((a_arr == 0.0) | (a_arr == 1.0)):
        raise ValueError("association must be 0 or 1")
    if not np.all((t_arr >= 0.0) & (t_arr <= 1.0)):
        raise ValueError("theta must be in [0, 1]")
    out = (1.0 - t_arr) * a_arr + 0.5 * t_arr
    # for a = 1 and theta within an ulp of 1 the exact value sits between 0.5
    # and the next double; round it up so a match never reads as uncertain
    out = np.where((out == 0.5) & (a_arr == 1.0) & (t_arr < 1.0), np.nextafter(0.5, 1.0), out)
    return float(out) if out.ndim == 0 else out


_MAX_REDRAWS = 100


def generate_instance(spec: SyntheticSpec, fixed_theta=None):
    """Draw a noisy multiway affinity and the ground-truth object labels.

    ``fixed_theta`` replaces the per-pair uncertainty draw (a test hook;
    ``0`` keeps the flipped associations binary).
    """
    rng = np.random.default_rng(spec.rng_seed)
    k, n = spec.universe_size, spec.num_views
    views = []
    for _ in range(n):
        # an empty view is re-drawn; a bounded number of attempts keeps
        # p = 0 (or a vanishing p) from looping forever
        for _ in range(_MAX_REDRAWS):
            seen = np.flatnonzero(rng.random(k) < spec.obs_prob)
            if seen.size:
                break
        else:
            seen = np.array([rng.integers(k)])
        views.append(seen)
    labels = np.concatenate(views)
    partition = ViewPartition(tuple(len(v) for v in views))
    m = partition.m
    ids = partition.view_ids

    truth = (labels[:, None] == labels[None, :]).astype(float)
    cross = np.triu(ids[:, None] != ids[None, :], 1)
    flip = rng.random((m, m)) < spec.mismatch
    theta = rng.random((m, m)) if fixed_theta is None else np.full((m, m), float(fixed_theta))

    a = np.where(flip, 1.0 - truth, truth)
    upper = np.where(cross, add_uncertainty(a, theta), 0.0)
    S = upper + upper.T
    np.fill_diagonal(S, 1.0)
    return validate_affinity(S, partition), labels


def _pair_count(counts):
    return sum(c * (c - 1) // 2 for c in counts)


def f1_score(precision, recall):
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f1(predicted, truth) -> Metrics:
    """Pairwise metrics: an association is an unordered pair sharing a label."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise ValueError(f"label vectors differ in length: {predicted.shape} vs {truth.shape}")
    n_pred = _pair_count(Counter(predicted.tolist()).values())
    n_true = _pair_count(Counter(truth.tolist()).values())
    n_ok = _pair_count(Counter(zip(predicted.tolist(), truth.tolist())).values())
    precision = n_ok / n_pred if n_pred else 0.0
    recall = n_ok / n_true if n_true else 0.0
    return Metrics(precision, recall, f1_score(precision, recall), n_pred, n_true, n_ok,
                   precision_undefined=n_pred == 0)


def _first_seen_relabel(labels):
    remap = {}
    return np.array([remap.setdefault(int(x), len(remap)) for x in labels], dtype=np.int64)


def baseline_threshold_cc(S: AffinityMatrix, tau: float = 0.5):
    """Threshold cross-view affinities at ``tau`` and take connected components."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    ids = S.partition.view_ids
    edges = np.argwhere(np.triu((S.values > tau) & (ids[:, None] != ids[None, :]), 1))
    m = S.m
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(m, m))
    _, comp = connected_components(graph, directed=False)
    return _first_seen_relabel(comp)


def _labels_to_assignment(labels):
    labels = _first_seen_relabel(labels)
    m = len(labels)
    U = np.zeros((m, m))
    U[np.arange(m), labels] = 1.0
    return U


ALGORITHMS = ("mixer", "baseline")


def run_sweep(grid, cfg: SolverConfig = SolverConfig(), trials: int = 10, tau: float = 0.5,
              fixed_theta=None):
    """Monte Carlo sweep over ``grid``; one aggregated row per (spec, algorithm).

    Trial ``t`` of a spec uses seed ``spec.rng_seed + t``.  Failed trials do not
    abort the sweep: they are counted under ``errors`` and left out of the means.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for spec in grid:
        acc = {name: {"metrics": [], "gap": [], "wall": [], "errors": Counter()} for name in ALGORITHMS}
        for t in range(trials):
            trial_spec = SyntheticSpec(spec.universe_size, spec.num_views, spec.obs_prob,
                                       spec.mismatch, spec.rng_seed + t)
            S, truth = generate_instance(trial_spec, fixed_theta=fixed_theta)
            optimum = brute_force_miqp(S)[1] if S.m <= MAX_MIQP_SIZE else None

            t0 = time.perf_counter()
            try:
                _, clusters, report = solve(S, cfg)
            except (NotConverged, FloatingPointError, np.linalg.LinAlgError) as exc:
                acc["mixer"]["errors"][type(exc).__name__] += 1
            else:
                acc["mixer"]["wall"].append(time.perf_counter() - t0)
                acc["mixer"]["metrics"].append(precision_recall_f1(clusters.labels, truth))
                if optimum is not None:
                    acc["mixer"]["gap"].append(optimality_gap(report.miqp_objective, optimum))

            t0 = time.perf_counter()
            labels = baseline_threshold_cc(S, tau)
            acc["baseline"]["wall"].append(time.perf_counter() - t0)
            acc["baseline"]["metrics"].append(precision_recall_f1(labels, truth))
            if optimum is not None:
                gap = optimality_gap(frobenius_form(_labels_to_assignment(labels), S), optimum)
                acc["baseline"]["gap"].append(gap)

        for name in ALGORITHMS:
            a = acc[name]
            ms = a["metrics"]
            rows.append({
                "spec": spec,
                "algorithm": name,
                "precision": _mean([x.precision for x in ms]),
                "recall": _mean([x.recall for x in ms]),
                "f1": _mean([x.f1 for x in ms]),
                "gap": _mean(a["gap"]),
                "wall_ms": None if not a["wall"] else 1000.0 * _mean(a["wall"]),
                "trials": len(ms),
                "errors": dict(a["errors"]),
            })
    return rows


def _mean(xs):
    # fsum: exact sum before dividing, independent of order
    return math.fsum(xs) / len(xs) if xs else None
