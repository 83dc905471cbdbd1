"""Brute-force references for testing: enumeration, direct minimization, naive sums.

Nothing here is used by the clustering pipeline. Each routine computes a
quantity the fast code also computes, by a different and simpler method.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import SizeMismatch, TooLarge, ZeroLikelihood
from .model import LabelGraph, ModelParams, Partition

MAP_LIMIT = 10**7
MAP_CHUNK = 1 << 15
TIE_TOL = 1e-9


def _log(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def log_joint(graph: LabelGraph, params: ModelParams, assignment) -> float:
    """``log P(sigma, A)``: prior of every item plus the label of every pair."""
    sigma = np.asarray(assignment, dtype=np.int64)
    if sigma.size != graph.n:
        raise SizeMismatch(f"assignment has {sigma.size} items, graph has {graph.n}")
    la = _log(params.user_alpha)
    lp = _log(params.user_p)
    total = float(la[sigma].sum())
    dense = graph.dense_labels()
    for u in range(graph.n):
        for w in range(u + 1, graph.n):
            total += lp[sigma[u], sigma[w], dense[u, w]]
    return total


def _block_scores(sig, la, finite, impossible):
    """Prior plus within-block pair terms for each row of ``sig``."""
    hot = (sig[:, :, None] == np.arange(la.size)).astype(float)
    score = la[sig].sum(axis=1)
    bad = np.zeros(sig.shape[0])
    for a in range(la.size):
        for b in range(la.size):
            left, right = hot[:, :, a], hot[:, :, b]
            score += ((left @ finite[a, b]) * right).sum(axis=1)
            bad += ((left @ impossible[a, b]) * right).sum(axis=1)
    return score, bad


class MapResult(NamedTuple):
    partition: Partition
    log_score: float
    ties: int


def map_oracle(graph: LabelGraph, params: ModelParams, detail: bool = False):
    """Maximum a posteriori partition by enumerating all K^n assignments.

    Assignments are visited in lexicographic order (item 0 most significant)
    and the first maximizer wins; scores within 1e-9 (relative) of the
    maximum count as ties and their number is reported with ``detail=True``.

    Raises:
        TooLarge: if K^n exceeds 10^7.
        ZeroLikelihood: if every assignment has probability zero.
    """
    n, K = graph.n, params.K
    if params.n != n:
        raise SizeMismatch(f"model has n={params.n}, graph has n={n}")
    total = K**n
    if total > MAP_LIMIT:
        raise TooLarge(f"{K}^{n} = {total} assignments exceed {MAP_LIMIT}")
    la = _log(params.user_alpha)
    lp = _log(params.user_p)
    dense = graph.dense_labels()
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    # weight[a, b, u, w]: log-probability of the pair u < w with u in a and w in b
    weight = np.where(upper, lp[:, :, dense], 0.0)
    banned = np.isneginf(weight)
    finite = np.where(banned, 0.0, weight)
    impossible = banned.astype(float)

    # The last `low` items vary fastest; their within-block scores are shared
    # by every assignment of the leading `high` items.
    low = 0
    while low < n and K ** (low + 1) <= MAP_CHUNK:
        low += 1
    high = n - low
    low_codes = np.arange(K**low, dtype=np.int64)
    low_sig = (low_codes[:, None] // K ** np.arange(low - 1, -1, -1, dtype=np.int64)) % K
    low_hot = (low_sig[:, :, None] == np.arange(K)).astype(float).reshape(low_codes.size, low * K)
    low_score, low_bad = _block_scores(low_sig, la, finite[:, :, high:, high:], impossible[:, :, high:, high:])
    high_powers = K ** np.arange(high - 1, -1, -1, dtype=np.int64)
    rows, cols = np.arange(high)[:, None], np.arange(high, n)[None, :]

    best, best_code, ties = -math.inf, 0, 0
    for prefix in range(K**high):
        hs = (prefix // high_powers) % K
        head, head_bad = _block_scores(hs[None, :], la, finite[:, :, :high, :high], impossible[:, :, :high, :high])
        # cross[w, b]: pairs between the fixed prefix and low item w placed in b
        cross = finite[hs[:, None], :, rows, cols].sum(axis=0)
        cross_bad = impossible[hs[:, None], :, rows, cols].sum(axis=0)
        score = head[0] + low_score + low_hot @ cross.ravel()
        bad = head_bad[0] + low_bad + low_hot @ cross_bad.ravel()
        score[bad > 0] = -math.inf
        codes = prefix * K**low + low_codes
        m = float(score.max())
        if m == -math.inf:
            continue
        tol = TIE_TOL * max(1.0, abs(m))
        if m > best + tol:
            best = m
            near = score >= m - tol
            best_code = int(codes[np.argmax(near)])
            ties = int(near.sum())
        elif m >= best - tol:
            ties += int((score >= best - tol).sum())
    if best == -math.inf:
        raise ZeroLikelihood("every assignment has probability zero")
    sigma = (best_code // K ** np.arange(n - 1, -1, -1, dtype=np.int64)) % K
    part = Partition(sigma, K)
    return MapResult(part, best, ties) if detail else part


def single_item_deviations(graph: LabelGraph, params: ModelParams, partition: Partition) -> np.ndarray:
    """``out[v, k]`` = log P of ``partition`` with item v moved to cluster k.

    Each entry is a full joint evaluation, so this is O(n^3 K); meant for n
    of a few dozen at most.
    """
    base = partition.assignment
    out = np.empty((graph.n, params.K))
    for v in range(graph.n):
        for k in range(params.K):
            sigma = base.copy()
            sigma[v] = k
            out[v, k] = log_joint(graph, params, sigma)
    return out


def naive_likelihood(graph: LabelGraph, partition: Partition, p_hat) -> np.ndarray:
    """``out[v, k] = sum_{w != v} log p_hat(k, s(w), x_vw)`` over every other item.

    ``x_vw`` is 0 for unlabeled pairs. ``p_hat`` is an array or any object
    with a ``p_hat`` array attribute.
    """
    p = np.asarray(getattr(p_hat, "p_hat", p_hat), dtype=float)
    if partition.n != graph.n:
        raise SizeMismatch(f"partition has {partition.n} items, graph has {graph.n}")
    logp = _log(p)
    sigma = partition.assignment
    dense = graph.dense_labels()
    n, K = graph.n, p.shape[0]
    out = np.zeros((n, K))
    others = np.ones(n, dtype=bool)
    for v in range(n):
        others[v] = False
        for k in range(K):
            out[v, k] = logp[k, sigma[others], dense[v, others]].sum()
        others[v] = True
    return out


def _pair_objective(alpha, y, lpi, lpj):
    ly = _log(y)
    with np.errstate(invalid="ignore"):
        ti = np.where(y > 0, y * (ly - lpi), 0.0)
        tj = np.where(y > 0, y * (ly - lpj), 0.0)
    return float((alpha[:, None] * ti).sum()), float((alpha[:, None] * tj).sum())


def _entropic_step(x, grad, step, support):
    """``x * exp(-step * grad)`` renormalized along the last axis, kept off zero on ``support``."""
    with np.errstate(divide="ignore"):
        z = np.where(support, np.log(np.where(support, x, 1.0)) - step * grad, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(support, np.maximum(np.exp(z), _TINY), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


_TINY = 1e-300


def divergence_pg_oracle(alpha, p_i, p_j, iterations: int = 200_000, patience: int = 2_000,
                         step: float = 0.3) -> float:
    """Minimize ``max(F_i(y), F_j(y))`` over products of simplices directly.

    The max is written as ``max_w (1 - w) F_i(y) + w F_j(y)`` and the saddle
    point is found by entropic mirror-prox: an extragradient step on ``y``
    (row-wise simplex, KL geometry) and on ``(1 - w, w)``, both projected by
    the multiplicative update. Objectives are rescaled by their value at the
    start so the step does not depend on how sparse the rows are. The best
    ``max(F_i, F_j)`` seen at any iterate is returned; iteration stops once it
    has not improved by a relative 1e-13 for ``patience`` steps.

    Mass is kept on the support shared by both rows; a row with no shared
    support makes the value infinite.
    """
    alpha = np.asarray(alpha, dtype=float)
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    if np.array_equal(p_i, p_j):
        return 0.0
    support = (p_i > 0) & (p_j > 0)
    if np.any(~support.any(axis=1)):
        return math.inf
    lpi = np.where(support, _log(np.where(support, p_i, 1.0)), 0.0)
    lpj = np.where(support, _log(np.where(support, p_j, 1.0)), 0.0)
    y = np.where(support, (p_i + p_j) / 2.0, 0.0)
    y /= y.sum(axis=1, keepdims=True)
    w = np.array([0.5, 0.5])
    start = max(_pair_objective(alpha, y, lpi, lpj))
    scale = 1.0 / start if start > 0 else 1.0
    step_y = step / (alpha.max() * scale)
    both = np.ones(2, dtype=bool)

    def evaluate(y, w):
        ly = np.where(support, _log(np.where(support, y, 1.0)), 0.0)
        gy = alpha[:, None] * (ly - w[0] * lpi - w[1] * lpj) * scale
        f = np.array(_pair_objective(alpha, y, lpi, lpj))
        return gy, f * scale, float(f.max())

    best = math.inf
    last_gain = 0
    for t in range(iterations):
        gy, gw, m = evaluate(y, w)
        y_half = _entropic_step(y, gy, step_y, support)
        w_half = _entropic_step(w, -gw, step, both)
        gy, gw, m_half = evaluate(y_half, w_half)
        cur = min(m, m_half)
        if cur < best * (1.0 - 1e-13):
            last_gain = t
        best = min(best, cur)
        if t - last_gain > patience:
            break
        y = _entropic_step(y, gy, step_y, support)
        w = _entropic_step(w, -gw, step, both)
    return best


def _mixtures(p_i, p_j, lams):
    both = (p_i > 0) & (p_j > 0)
    lpi = np.where(both, _log(np.where(both, p_i, 1.0)), 0.0)
    lpj = np.where(both, _log(np.where(both, p_j, 1.0)), 0.0)
    w = np.exp((1.0 - lams)[:, None, None] * lpi[None] + lams[:, None, None] * lpj[None])
    w = np.where(both[None], w, 0.0)
    return w, w.sum(axis=2)


def divergence_grid_oracle(alpha, p_i, p_j, points: int = 10_000) -> float:
    """Min over an even grid of lam in [0, 1] of ``max(F_i, F_j)`` at the
    normalized geometric mixture ``p_i^(1-lam) p_j^lam``.

    The objective has a kink at the balance point, so the grid value
    overshoots the true minimum by an amount first order in the grid step.
    """
    alpha = np.asarray(alpha, dtype=float)
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    lams = np.linspace(0.0, 1.0, points)
    w, z = _mixtures(p_i, p_j, lams)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = w / z[..., None]
        lq = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), 0.0)
        fi = (alpha[None, :] * np.where(q > 0, q * (lq - _log(p_i)[None]), 0.0).sum(axis=2)).sum(axis=1)
        fj = (alpha[None, :] * np.where(q > 0, q * (lq - _log(p_j)[None]), 0.0).sum(axis=2)).sum(axis=1)
    vals = np.maximum(fi, fj)
    vals = np.where(np.isnan(vals), np.inf, vals)
    return float(vals.min())


def divergence_dual_grid(alpha, p_i, p_j, points: int = 10_000) -> float:
    """Max over an even lam grid of ``-sum_k alpha_k log Z_k(lam)``.

    ``Z_k(lam)`` normalizes the geometric mixture of row k. This concave
    dual equals the min-max value at its maximizer and is flat there, so the
    grid error is second order in the step.
    """
    alpha = np.asarray(alpha, dtype=float)
    lams = np.linspace(0.0, 1.0, points)
    _, z = _mixtures(np.asarray(p_i, dtype=float), np.asarray(p_j, dtype=float), lams)
    with np.errstate(divide="ignore"):
        phi = -(alpha[None, :] * np.log(z)).sum(axis=1)
    return float(phi.max())
