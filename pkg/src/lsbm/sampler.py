"""Reproducible LSBM instance generation in O(n + m) expected time."""

from __future__ import annotations

import math

import numpy as np

from .model import LabelGraph, ModelParams, Partition
from .rng import check_seed, stream


def _bernoulli_positions(gen: np.random.Generator, N: int, q: float) -> np.ndarray:
    """Indices in ``[0, N)`` that succeed in N independent Bernoulli(q) trials.

    Jumps between successes are geometric, so the cost is proportional to
    the number of successes rather than to N.
    """
    if N <= 0 or q <= 0.0:
        return np.empty(0, dtype=np.int64)
    if q >= 1.0:
        return np.arange(N, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        mean = (N - pos - 1) * q
        batch = int(mean + 6.0 * math.sqrt(mean) + 16)
        cand = pos + np.cumsum(gen.geometric(q, size=batch), dtype=np.int64)
        keep = cand[cand < N]
        chunks.append(keep)
        if keep.size < batch:
            break
        pos = int(cand[-1])
    return np.concatenate(chunks)


def _triangle_decode(r: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Map ranks in the lexicographic list of pairs a < b < s to (a, b)."""
    if r.size == 0:
        return r, r
    # offset(a) = a (2s - a - 1) / 2 is the rank of (a, a + 1)
    t = 2 * s - 1
    a = np.floor((t - np.sqrt(np.maximum(t * t - 8.0 * r, 0.0))) / 2.0).astype(np.int64)
    a = np.clip(a, 0, s - 2)

    def offset(x):
        return x * (2 * s - x - 1) // 2

    for _ in range(3):
        a = np.where(offset(a) > r, a - 1, a)
        a = np.where(offset(a + 1) <= r, a + 1, a)
    b = r - offset(a) + a + 1
    return a, b


def sample_assignment(params: ModelParams, seed: int) -> Partition:
    """Draw cluster memberships i.i.d. from ``alpha`` (caller's labels)."""
    gen = stream(seed, "assignment")
    sigma = gen.choice(params.K, size=params.n, p=params.user_alpha)
    return Partition(sigma, params.K)


def sample(params: ModelParams, seed: int) -> tuple[Partition, LabelGraph]:
    """Sample ground truth and observations of an LSBM instance.

    Each unordered pair is labeled independently; for every cluster pair
    (i <= j) the pairs carrying some non-zero label are located by geometric
    skipping with rate ``sum_{l>=1} p(i,j,l)`` and their label is then drawn
    from the conditional distribution. Each block uses its own random stream
    so the output does not depend on the order blocks are processed.

    Returns:
        ``(truth, graph)``; identical ``(params, seed)`` give identical output.
    """
    seed = check_seed(seed)
    truth = sample_assignment(params, seed)
    K, L, n = params.K, params.L, params.n
    if L == 0:
        raise ValueError("a model with L = 0 has no labels to observe")
    p = params.user_p
    members = [truth.members(k) for k in range(K)]
    us, vs, ls = [], [], []
    for i in range(K):
        for j in range(i, K):
            q = float(p[i, j, 1:].sum())
            si, sj = members[i].size, members[j].size
            N = si * (si - 1) // 2 if i == j else si * sj
            gen = stream(seed, "labels", i, j)
            pos = _bernoulli_positions(gen, N, q)
            if pos.size == 0:
                continue
            if i == j:
                a, b = _triangle_decode(pos, si)
                u, v = members[i][a], members[i][b]
            else:
                u, v = members[i][pos // sj], members[j][pos % sj]
            cdf = np.cumsum(p[i, j, 1:]) / q
            cdf[-1] = 1.0
            lab = np.searchsorted(cdf, gen.random(pos.size), side="right") + 1
            us.append(u)
            vs.append(v)
            ls.append(lab)
    if not us:
        return truth, LabelGraph.empty(n, L)
    return truth, LabelGraph(n, L, np.concatenate(us), np.concatenate(vs), np.concatenate(ls))


def expected_label_counts(params: ModelParams) -> np.ndarray:
    """Expected number of pairs with label l between clusters i and j.

    Returns a (K, K, L) array. Off-diagonal entries count pairs with one end
    in each cluster, ``n (n - 1) alpha_i alpha_j p(i,j,l)``; diagonal entries
    count pairs inside a cluster, ``n (n - 1) / 2 alpha_i^2 p(i,i,l)``. Both
    are exact under multinomial cluster sizes.
    """
    n = params.n
    a = params.user_alpha
    pairs = n * (n - 1) * np.outer(a, a)
    pairs[np.diag_indices_from(pairs)] /= 2.0
    return pairs[:, :, None] * params.user_p[..., 1:]
