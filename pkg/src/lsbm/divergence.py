"""The divergence D(alpha, p) and the quantities derived from it.

For two clusters i and j with label-distribution matrices ``p_i`` and
``p_j`` (rows indexed by the other endpoint's cluster k), the pair
divergence is

    min over y in (simplex)^K of max(F_i(y), F_j(y)),
    F_c(y) = sum_k alpha_k KL(y_k, p_c[k]).

The minimizer is a row-wise normalized geometric mixture
``p_i^(1-lam) p_j^lam`` at the ``lam`` where F_i and F_j balance, which is
what :func:`dl_plus` finds by bisection. ``D(alpha, p)`` is the minimum of
the pair divergence over cluster pairs. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateSupport, DomainError, SingleCluster, ZeroOverlap
from .model import ModelParams

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SCAN_POINTS = 33


def kl(y, p) -> float:
    """KL(y || p) with 0 log 0 = 0; ``inf`` when y puts mass where p has none."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    pos = y > 0
    if np.any(p[pos] <= 0):
        return math.inf
    return float(np.sum(y[pos] * np.log(y[pos] / p[pos])))


def _kl_rows(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    pos = y > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, y * np.log(np.where(pos, y, 1.0) / p), 0.0)
    terms = np.where(pos & (p <= 0), np.inf, terms)
    return terms.sum(axis=-1)


def _mixture_unnormalized(p_i: np.ndarray, p_j: np.ndarray, lam: float) -> np.ndarray:
    # restricted to the shared support at every lam, endpoints included, so
    # the balance function stays continuous when the supports differ
    both = (p_i > 0) & (p_j > 0)
    if lam <= 0.0:
        return np.where(both, p_i, 0.0)
    if lam >= 1.0:
        return np.where(both, p_j, 0.0)
    out = np.zeros(np.broadcast(p_i, p_j).shape)
    out[both] = np.exp((1.0 - lam) * np.log(p_i[both]) + lam * np.log(p_j[both]))
    return out


def geometric_mixture(p_i_row, p_j_row, lam: float) -> np.ndarray:
    """Normalized entrywise ``p_i^(1-lam) p_j^lam`` on the labels both rows allow.

    At ``lam = 0`` this is ``p_i`` restricted to the shared support and
    renormalized (the limit from inside), likewise ``p_j`` at ``lam = 1``.

    Raises:
        DegenerateSupport: if the two rows share no support.
    """
    p_i_row = np.asarray(p_i_row, dtype=float)
    p_j_row = np.asarray(p_j_row, dtype=float)
    w = _mixture_unnormalized(p_i_row, p_j_row, float(lam))
    z = w.sum()
    if z <= 0:
        raise DegenerateSupport("geometric mixture has zero mass")
    return w / z


def _mixture_matrix(p_i: np.ndarray, p_j: np.ndarray, lam: float) -> np.ndarray:
    w = _mixture_unnormalized(p_i, p_j, lam)
    z = w.sum(axis=1, keepdims=True)
    if np.any(z <= 0):
        raise DegenerateSupport("geometric mixture has zero mass in some row")
    return w / z


def _kl_sums(alpha, q, p_i, p_j) -> tuple[float, float]:
    return float(alpha @ _kl_rows(q, p_i)), float(alpha @ _kl_rows(q, p_j))


class DLPlus(NamedTuple):
    """Result of :func:`dl_plus`.

    ``value`` is ``inf`` (with ``lambda_star`` NaN and ``q`` None) when some
    row pair has disjoint support: the clusters are then distinguishable
    from a single observation.
    """

    value: float
    lambda_star: float
    q: np.ndarray | None
    non_monotone: bool = False


def dl_plus(alpha, p_i, p_j) -> DLPlus:
    """Balanced min-max KL divergence between clusters with rows p_i and p_j.

    The balance function ``g(lam) = F_i(q_lam) - F_j(q_lam)`` is scanned on a
    33-point grid; with a single sign change its root is bracketed and
    bisected until ``|g| <= 1e-12`` (and ``|g|`` is below 1e-9 of the common
    value) or the bracket is narrower than 1e-14.
    Without a sign change the better endpoint is returned, and with several
    sign changes the result falls back to the grid minimum of
    ``max(F_i, F_j)`` and ``non_monotone`` is set.
    """
    alpha = np.asarray(alpha, dtype=float)
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    if np.array_equal(p_i, p_j):
        return DLPlus(0.0, 0.0, p_i.copy())
    if np.any(((p_i > 0) & (p_j > 0)).sum(axis=1) == 0):
        return DLPlus(math.inf, math.nan, None)

    def evaluate(lam):
        q = _mixture_matrix(p_i, p_j, lam)
        fi, fj = _kl_sums(alpha, q, p_i, p_j)
        return q, fi, fj

    grid = np.linspace(0.0, 1.0, SCAN_POINTS)
    evals = [evaluate(lam) for lam in grid]
    g = np.array([fi - fj for _, fi, fj in evals])
    sign = np.sign(g)
    nonzero = sign[sign != 0]
    changes = int(np.count_nonzero(nonzero[1:] != nonzero[:-1])) if nonzero.size else 0

    if changes > 1:
        worst = [max(fi, fj) for _, fi, fj in evals]
        k = int(np.argmin(worst))
        q, fi, fj = evals[k]
        return DLPlus(max(fi, fj), float(grid[k]), q, True)

    zero = np.flatnonzero(g == 0)
    if zero.size:
        k = int(zero[0])
        q, fi, fj = evals[k]
        return DLPlus(fi, float(grid[k]), q)
    if changes == 0:
        ends = [max(evals[0][1], evals[0][2]), max(evals[-1][1], evals[-1][2])]
        k = 0 if ends[0] <= ends[1] else SCAN_POINTS - 1
        q, fi, fj = evals[k]
        return DLPlus(max(fi, fj), float(grid[k]), q)

    k = int(np.flatnonzero(sign[1:] != sign[:-1])[0])
    lo, hi = grid[k], grid[k + 1]
    g_lo = g[k]
    q, fi, fj = evals[k]
    lam = lo
    while hi - lo > 1e-14:
        lam = 0.5 * (lo + hi)
        q, fi, fj = evaluate(lam)
        gm = fi - fj
        # the absolute 1e-12 stop alone is too coarse when D itself is tiny
        if abs(gm) <= 1e-12 and abs(gm) <= 1e-9 * max(fi, fj):
            break
        if (gm < 0) == (g_lo < 0):
            lo, g_lo = lam, gm
        else:
            hi = lam
    return DLPlus(0.5 * (fi + fj), float(lam), q)


@dataclass(frozen=True)
class DivergenceReport:
    """``D(alpha, p)`` together with its minimizing pair and balanced q.

    Cluster indices are in the caller's label order.
    """

    d_value: float
    argmin_pair: tuple[int, int]
    lambda_star: float
    q_matrix: np.ndarray | None
    per_pair: dict = field(default_factory=dict)
    non_monotone: bool = False

    def to_dict(self, n: int | None = None) -> dict:
        out = {
            "d_value": self.d_value,
            "pair": list(self.argmin_pair),
            "lambda_star": self.lambda_star,
            "q": None if self.q_matrix is None else self.q_matrix.tolist(),
            "per_pair": [
                {"pair": [i, j], "value": v} for (i, j), v in sorted(self.per_pair.items())
            ],
            "non_monotone": self.non_monotone,
        }
        if n is not None:
            out["n"] = int(n)
            out["error_floor"] = error_floor(n, self.d_value)
        return out


def divergence(params: ModelParams) -> DivergenceReport:
    """Compute ``D(alpha, p)`` over all K(K-1)/2 cluster pairs.

    Pairs with infinite divergence are skipped in the minimum unless every
    pair is infinite.

    Raises:
        SingleCluster: if K = 1.
    """
    if params.K < 2:
        raise SingleCluster("the divergence needs K >= 2")
    alpha, p = params.user_alpha, params.user_p
    per_pair = {}
    best = None
    for i in range(params.K):
        for j in range(i + 1, params.K):
            res = dl_plus(alpha, p[i], p[j])
            per_pair[(i, j)] = res.value
            if best is None or res.value < best[1].value:
                best = ((i, j), res)
    (i, j), res = best
    return DivergenceReport(
        d_value=res.value,
        argmin_pair=(i, j),
        lambda_star=res.lambda_star,
        q_matrix=res.q,
        per_pair=per_pair,
        non_monotone=res.non_monotone,
    )


def golden_max(fn, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-12) -> tuple[float, float]:
    """Maximize a unimodal ``fn`` on ``[lo, hi]``; returns (argmax, max)."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    candidates = [(fn(lo), lo), (fn(hi), hi), (fc, c), (fd, d)]
    value, x = max(candidates, key=lambda t: t[0])
    return x, value


def ch_divergence(alpha, p_i, p_j) -> tuple[float, float]:
    """Sparse-regime approximation of the pair divergence.

    Maximizes over lam in [0, 1]

        sum_k alpha_k sum_{l>=1} ((1-lam) p_i + lam p_j - p_i^(1-lam) p_j^lam)

    by golden-section search (the objective is concave in lam).

    Returns:
        ``(value, lambda_star)``.
    """
    alpha = np.asarray(alpha, dtype=float)
    a = np.asarray(p_i, dtype=float)[:, 1:]
    b = np.asarray(p_j, dtype=float)[:, 1:]

    def objective(lam):
        mix = _mixture_unnormalized(a, b, lam)
        return float(alpha @ ((1.0 - lam) * a + lam * b - mix).sum(axis=1))

    lam, value = golden_max(objective)
    return value, lam


def symmetric_divergence(K: int, p_vec, q_vec) -> float:
    """``-(2/K) log sum_l sqrt(p(l) q(l))`` for the symmetric K-cluster LSBM.

    Raises:
        ZeroOverlap: if the two distributions have disjoint supports.
    """
    bc = float(np.sum(np.sqrt(np.asarray(p_vec, dtype=float) * np.asarray(q_vec, dtype=float))))
    if bc <= 0:
        raise ZeroOverlap("the distributions share no support")
    return -2.0 / K * math.log(bc)


def _binary_g(alpha1, a, b):
    if not 0 < alpha1 <= 0.5:
        raise DomainError("g needs 0 < alpha1 <= 1/2")
    if not a > b > 0:
        raise DomainError("g needs a > b > 0")

    def objective(lam):
        return (
            (1 - alpha1 - lam + 2 * alpha1 * lam) * a
            + (alpha1 + lam - 2 * alpha1 * lam) * b
            - alpha1 * a**lam * b ** (1 - lam)
            - (1 - alpha1) * a ** (1 - lam) * b**lam
        )

    return golden_max(objective)[1]


def _hidden_h(alpha, a, b):
    if not 0 < alpha < 1:
        raise DomainError("h needs 0 < alpha < 1")
    if not a > b > 0:
        raise DomainError("h needs a > b > 0")
    r = math.log(a / b)
    return alpha * (a - (a - b) * (1 + math.log(a - b) - math.log(a * r)) / r)


def _sampled_l(delta, a, b):
    if not delta > 0:
        raise DomainError("l needs delta > 0")
    if not (0 < a < 1 and 0 < b < 1):
        raise DomainError("l needs a, b in (0, 1)")
    return delta * (1 - math.sqrt(a * b) - math.sqrt((1 - a) * (1 - b)))


def _signed_m(a_plus, a_minus, b_plus, b_minus):
    if not (a_plus > b_plus >= 0 and b_minus > a_minus >= 0):
        raise DomainError("m needs a_plus > b_plus >= 0 and a_minus < b_minus")
    return 0.5 * (
        (math.sqrt(a_plus) - math.sqrt(b_plus)) ** 2
        + (math.sqrt(a_minus) - math.sqrt(b_minus)) ** 2
    )


_CLOSED_FORMS = {
    "binary_g": _binary_g,
    "hidden_h": _hidden_h,
    "sampled_l": _sampled_l,
    "signed_m": _signed_m,
}


def closed_form(kind: str, *args, **kwargs) -> float:
    """Evaluate a named closed-form error exponent (per unit of f(n)).

    ``binary_g(alpha1, a, b)``: binary SBM with cluster sizes alpha1, 1-alpha1.
    ``hidden_h(alpha, a, b)``: single hidden community.
    ``sampled_l(delta, a, b)``: dense SBM observed on sampled pairs.
    ``signed_m(a_plus, a_minus, b_plus, b_minus)``: two-cluster signed network.

    Raises:
        DomainError: for constants outside a formula's domain.
    """
    try:
        fn = _CLOSED_FORMS[kind]
    except KeyError:
        raise DomainError(f"unknown closed form {kind!r}") from None
    return float(fn(*args, **kwargs))


def error_floor(n: int, d_value: float) -> float:
    """``n exp(-n D)`` clamped to ``[0, n]``."""
    if d_value < 0:
        raise ValueError("d_value must be non-negative")
    return float(min(max(n * math.exp(-n * d_value), 0.0), n))
