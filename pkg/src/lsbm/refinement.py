"""Second stage of the clustering pipeline: parameter estimation and likelihood sweeps.

Each sweep moves every item to the cluster maximizing its log-likelihood
given the previous partition and the estimated label probabilities. Scores
use the identity

    score(v, k) = sum_i |S_i \\ {v}| log p(k, i, 0)
                  + sum_{labeled (v, w)} [log p(k, s(w), l) - log p(k, s(w), 0)]

so a sweep costs O((n + m) K) instead of O(n^2 K).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EmptyCluster, SizeMismatch
from .model import LabelGraph, ModelParams, Partition
from .rng import stream
from .spectral import SpectralConfig, SpectralOutput, spectral_stage

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class EstimatedParams:
    """Label probabilities between estimated clusters.

    Attributes:
        p_hat: (K, K, L+1) array, symmetric, rows summing to one.
        sizes: cluster sizes the estimate was computed from.
        floor: lower bound applied to the entries.
    """

    p_hat: np.ndarray
    sizes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    floor: float = 0.0

    def __post_init__(self):
        p = np.array(self.p_hat, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[1] or p.shape[2] < 1:
            raise ValueError(f"p_hat must have shape (K, K, L+1), got {p.shape}")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("p_hat entries must be strictly positive and finite")
        p.setflags(write=False)
        object.__setattr__(self, "p_hat", p)

    @property
    def K(self) -> int:
        return self.p_hat.shape[0]

    @property
    def L(self) -> int:
        return self.p_hat.shape[2] - 1

    @classmethod
    def from_model(cls, params: ModelParams) -> "EstimatedParams":
        """True parameters in the caller's cluster order."""
        return cls(params.user_p)

    def relabeled(self, order) -> "EstimatedParams":
        """Parameters with new cluster ``k`` being old cluster ``order[k]``."""
        order = np.asarray(order)
        sizes = self.sizes[order] if self.sizes.size else self.sizes
        return EstimatedParams(self.p_hat[np.ix_(order, order)], sizes, self.floor)

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat.tolist(), "sizes": self.sizes.tolist(), "floor": self.floor}


def pair_label_counts(graph: LabelGraph, assignment: np.ndarray, K: int) -> np.ndarray:
    """Labeled pairs per cluster pair: (K, K, L) array, symmetric.

    Off-diagonal entries count pairs with one end in each cluster; diagonal
    entries count pairs inside the cluster.
    """
    a = assignment[graph.u]
    b = assignment[graph.v]
    counts = np.zeros((K, K, graph.L))
    np.add.at(counts, (a, b, graph.labels - 1), 1.0)
    off = counts + counts.transpose(1, 0, 2)
    idx = np.arange(K)
    off[idx, idx] = counts[idx, idx]
    return off


def estimate_params(graph: LabelGraph, clusters: Partition, k_hat: int | None = None,
                    floor: float | None = None) -> EstimatedParams:
    """Label frequencies between and within clusters.

    Labels l >= 1 are floored at ``1 / n^2`` (or ``floor``); label 0 gets the
    remaining mass, and the row is renormalized only if that remainder falls
    below the floor. A singleton cluster has no internal pairs and gets the
    floor for every l >= 1 inside it.

    Raises:
        EmptyCluster: if any cluster index below ``k_hat`` has no items.
        SizeMismatch: if the partition and graph disagree on n.
    """
    n = graph.n
    if clusters.n != n:
        raise SizeMismatch(f"partition has {clusters.n} items, graph has {n}")
    K = clusters.k_hat if k_hat is None else int(k_hat)
    sizes = np.bincount(clusters.assignment, minlength=K)
    if sizes.size > K:
        raise ValueError(f"partition uses cluster {sizes.size - 1} >= k_hat = {K}")
    if np.any(sizes == 0):
        raise EmptyCluster(f"clusters {np.flatnonzero(sizes == 0).tolist()} are empty")
    floor = 1.0 / n**2 if floor is None else float(floor)

    counts = pair_label_counts(graph, clusters.assignment, K)
    pairs = np.outer(sizes, sizes).astype(float)
    np.fill_diagonal(pairs, sizes * (sizes - 1) / 2.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(pairs[..., None] > 0, counts / pairs[..., None], 0.0)
    freq = np.maximum(freq, floor)
    p = np.empty((K, K, graph.L + 1))
    p[..., 1:] = freq
    p[..., 0] = 1.0 - freq.sum(axis=-1)
    low = p[..., 0] < floor
    if np.any(low):
        p[low, 0] = floor
        p[low] /= p[low].sum(axis=-1, keepdims=True)
    return EstimatedParams(p, sizes.astype(np.int64), floor)


def score_table(graph: LabelGraph, clusters: Partition, p_hat: EstimatedParams) -> np.ndarray:
    """Log-likelihood of each item under each cluster, shape (n, K).

    Item ``v`` is scored against the partition with ``v`` itself excluded.
    """
    n, L = graph.n, graph.L
    K = p_hat.K
    if clusters.n != n:
        raise SizeMismatch(f"partition has {clusters.n} items, graph has {n}")
    if p_hat.L != L:
        raise ValueError(f"p_hat has L={p_hat.L}, graph has L={L}")
    sigma = clusters.assignment
    if sigma.size and sigma.max() >= K:
        raise ValueError(f"partition uses cluster {sigma.max()} but p_hat has K={K}")
    logp = np.log(p_hat.p_hat)
    log0 = logp[..., 0]
    sizes = np.bincount(sigma, minlength=K).astype(float)

    score = np.tile(log0 @ sizes, (n, 1)) - log0[:, sigma].T
    if graph.m and L:
        delta = (logp[..., 1:] - log0[..., None]).reshape(K, K * L)
        rows = np.concatenate([graph.u, graph.v])
        cols = np.concatenate([sigma[graph.v], sigma[graph.u]]) * L + np.tile(graph.labels - 1, 2)
        M = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, K * L))
        score += np.asarray(M @ delta.T)
    return score


def _argmax_with_ties(scores: np.ndarray, seed: int, sweep: int) -> np.ndarray:
    best = scores.max(axis=1)
    tol = TIE_RTOL * np.maximum(np.abs(best), 1.0)
    near = scores >= (best - tol)[:, None]
    choice = np.argmax(near, axis=1)
    for v in np.flatnonzero(near.sum(axis=1) > 1):
        options = np.flatnonzero(near[v])
        choice[v] = options[stream(seed, "ties", sweep, int(v)).integers(options.size)]
    return choice


def improve_once(graph: LabelGraph, clusters: Partition, p_hat: EstimatedParams,
                 seed: int = 0, sweep: int = 0) -> Partition:
    """One synchronous likelihood sweep.

    Every item is scored against ``clusters`` (the previous partition) and
    moved to its best cluster. Scores within a relative 1e-12 of the best are
    treated as tied and one is drawn uniformly from the ``ties`` stream keyed
    by ``(sweep, item)``, so the outcome does not depend on processing order.
    """
    choice = _argmax_with_ties(score_table(graph, clusters, p_hat), seed, sweep)
    return Partition(choice, p_hat.K)


@dataclass
class RefineResult:
    partition: Partition
    sweeps: int
    changes: list = field(default_factory=list)
    error_trace: list | None = None
    p_hat: EstimatedParams | None = None


def refine(graph: LabelGraph, initial: Partition, p_hat: EstimatedParams, seed: int = 0,
           truth: Partition | None = None, reestimate: bool = False) -> RefineResult:
    """Apply ``floor(ln n)`` synchronous sweeps.

    Args:
        graph: observations.
        initial: starting partition over all items.
        p_hat: label probabilities used for scoring.
        seed: seed of the tie-break stream.
        truth: if given, ``error_trace`` holds the misclassified count before
            the first sweep and after each sweep.
        reestimate: re-estimate ``p_hat`` from the current partition before
            each sweep after the first (off by default).
    """
    from .evaluation import misclassified

    sweeps = math.floor(math.log(graph.n)) if graph.n > 0 else 0
    current = initial
    trace = None if truth is None else [misclassified(current, truth)[0]]
    changes = []
    for t in range(sweeps):
        if reestimate and t > 0:
            sizes = np.bincount(current.assignment, minlength=p_hat.K)
            if np.all(sizes > 0):
                p_hat = estimate_params(graph, current, p_hat.K, p_hat.floor or None)
        nxt = improve_once(graph, current, p_hat, seed, t)
        changes.append(int(np.count_nonzero(nxt.assignment != current.assignment)))
        current = nxt
        if trace is not None:
            trace.append(misclassified(current, truth)[0])
    return RefineResult(current, sweeps, changes, trace, p_hat)


@dataclass
class PipelineResult:
    """Everything produced by one run of the two-stage algorithm."""

    spectral: SpectralOutput | None
    initial: Partition
    p_hat: EstimatedParams
    final: Partition
    refine: RefineResult

    @property
    def k_hat(self) -> int:
        return self.p_hat.K


def spectral_partition(graph: LabelGraph, seed: int, cfg: SpectralConfig | None = None,
                       truth: Partition | None = None, reestimate: bool = False) -> PipelineResult:
    """Spectral initialization followed by likelihood refinement.

    Parameters are estimated once from the spectral partition of all items
    (trimmed items at their nearest reference) and reused by every sweep.
    """
    cfg = SpectralConfig() if cfg is None else cfg
    out = spectral_stage(graph, cfg, seed)
    initial = Partition(out.full_assignment(), out.k_hat)
    return refine_from(graph, initial, seed, truth, reestimate, spectral=out)


def refine_from(graph: LabelGraph, initial: Partition, seed: int, truth: Partition | None = None,
                reestimate: bool = False, spectral: SpectralOutput | None = None) -> PipelineResult:
    """Estimate parameters from ``initial`` and run the sweeps.

    Empty cluster indices of ``initial`` are dropped first.
    """
    used = np.unique(initial.assignment)
    if used.size != initial.k_hat:
        mapping = np.full(initial.k_hat, -1, dtype=np.int64)
        mapping[used] = np.arange(used.size)
        initial = Partition(mapping[initial.assignment], used.size)
    p_hat = estimate_params(graph, initial)
    result = refine(graph, initial, p_hat, seed, truth, reestimate)
    return PipelineResult(spectral, initial, p_hat, result.partition, result)


__all__ = [
    "EstimatedParams",
    "PipelineResult",
    "RefineResult",
    "estimate_params",
    "improve_once",
    "pair_label_counts",
    "refine",
    "refine_from",
    "score_table",
    "spectral_partition",
]
