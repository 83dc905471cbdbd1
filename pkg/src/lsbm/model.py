"""Domain types of the labeled stochastic block model.

Conventions used throughout the package:

* Cluster and item indices are 0-based.
* Label ``0`` is the implicit "nothing observed" label; only labels
  ``1..L`` are stored in a :class:`LabelGraph`.
* Logarithms are natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateModel, ModelError, OutOfRange

SUM_TOL = 1e-12
SYM_TOL = 1e-15


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_rows(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DegenerateModel("label probabilities must lie in [0, 1]")
    bad = np.argwhere(np.abs(p.sum(axis=-1) - 1.0) > SUM_TOL)
    if bad.size:
        i, j = bad[0]
        raise DegenerateModel(f"row p({i},{j},.) sums to {p[i, j].sum()!r}, not 1")


class ModelParams:
    """Parameters ``(n, alpha, p)`` of an LSBM.

    ``alpha`` has length K and ``p`` has shape (K, K, L + 1) with
    ``p[i, j, l]`` the probability that a pair between clusters i and j
    carries label l.

    The instance stores clusters sorted by non-decreasing ``alpha``
    (``alpha``, ``p``) together with ``perm``, where ``perm[k]`` is the
    caller's label for sorted cluster ``k``. ``user_alpha`` and ``user_p``
    return the arrays in the order the caller supplied, and every public
    output of the package is expressed in that order.

    Raises:
        ModelError: on shape, prior, symmetry or most-frequent-label
            violations.
        DegenerateModel: if a row ``p[i, j, :]`` is not a distribution.
    """

    def __init__(self, n: int, alpha: Sequence[float], p) -> None:
        n = int(n)
        if n < 1:
            raise ModelError(f"n must be positive, got {n}")
        alpha = np.asarray(alpha, dtype=float).ravel()
        p = np.asarray(p, dtype=float)
        K = alpha.size
        if K < 1:
            raise ModelError("alpha must be non-empty")
        if p.ndim != 3 or p.shape[:2] != (K, K) or p.shape[2] < 1:
            raise ModelError(f"p must have shape ({K}, {K}, L+1), got {p.shape}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0) or np.any(alpha > 1):
            raise ModelError("alpha entries must lie in (0, 1]")
        if abs(alpha.sum() - 1.0) > SUM_TOL:
            raise ModelError(f"alpha sums to {alpha.sum()!r}, not 1")
        _check_rows(p)
        if np.max(np.abs(p - p.transpose(1, 0, 2))) > SYM_TOL:
            raise ModelError("p must be symmetric: p(i,j,l) = p(j,i,l)")
        freq = np.einsum("i,j,ijl->l", alpha, alpha, p)
        if int(np.argmax(freq)) != 0:
            raise ModelError("label 0 must be the most frequent label")

        perm = np.argsort(alpha, kind="stable")
        self.n = n
        self.perm = _frozen(perm)
        self.alpha = _frozen(alpha[perm])
        self.p = _frozen(p[np.ix_(perm, perm)])
        self.user_alpha = _frozen(alpha)
        self.user_p = _frozen(p)

    @property
    def K(self) -> int:
        return self.alpha.size

    @property
    def L(self) -> int:
        return self.p.shape[2] - 1

    @property
    def p_bar(self) -> float:
        """Largest probability of a non-zero label."""
        if self.L == 0:
            return 0.0
        return float(self.user_p[..., 1:].max())

    def relabeled(self, order: Sequence[int]) -> "ModelParams":
        """Copy where new cluster ``k`` is old (user) cluster ``order[k]``."""
        order = np.asarray(order, dtype=int)
        return ModelParams(self.n, self.user_alpha[order], self.user_p[np.ix_(order, order)])

    def with_n(self, n: int) -> "ModelParams":
        return ModelParams(n, self.user_alpha, self.user_p)

    def __repr__(self) -> str:
        return f"ModelParams(n={self.n}, K={self.K}, L={self.L}, alpha={self.user_alpha.tolist()})"


class LabelGraph:
    """Sparse undirected observation of non-zero labels.

    Each stored pair ``(u, v)`` has ``u < v`` and exactly one label in
    ``1..L``; every other pair implicitly carries label 0. Pairs are kept in
    lexicographic order.
    """

    def __init__(self, n: int, L: int, u, v, labels) -> None:
        n, L = int(n), int(L)
        if n < 1:
            raise ModelError(f"n must be positive, got {n}")
        if L < 1:
            raise ModelError(f"L must be positive, got {L}")
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        labels = np.asarray(labels, dtype=np.int64).ravel()
        if not (u.size == v.size == labels.size):
            raise ModelError("u, v and labels must have equal length")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        if np.any(lo == hi):
            raise ModelError("self-loops are not allowed")
        if lo.size and (lo.min() < 0 or hi.max() >= n):
            raise ModelError(f"item index out of range [0, {n})")
        if labels.size and (labels.min() < 1 or labels.max() > L):
            raise ModelError(f"labels must lie in 1..{L}")
        key = lo * n + hi
        order = np.argsort(key, kind="stable")
        key = key[order]
        if key.size > 1 and np.any(key[1:] == key[:-1]):
            raise ModelError("a pair appears more than once")
        self.n = n
        self.L = L
        self.u = _frozen(lo[order])
        self.v = _frozen(hi[order])
        self.labels = _frozen(labels[order])

    @classmethod
    def from_triples(cls, n: int, L: int, triples: Iterable[tuple[int, int, int]]) -> "LabelGraph":
        arr = np.array(list(triples), dtype=np.int64).reshape(-1, 3)
        return cls(n, L, arr[:, 0], arr[:, 1], arr[:, 2])

    @classmethod
    def empty(cls, n: int, L: int) -> "LabelGraph":
        return cls(n, L, [], [], [])

    @property
    def m(self) -> int:
        """Number of labeled (label >= 1) unordered pairs."""
        return int(self.u.size)

    def edges(self, label: int) -> np.ndarray:
        """Pairs ``(u, v)`` carrying ``label`` as an (m_l, 2) array."""
        mask = self.labels == label
        return np.column_stack([self.u[mask], self.v[mask]])

    @cached_property
    def label_matrix(self) -> sp.csr_matrix:
        """Symmetric CSR matrix whose (u, v) entry is the label of the pair."""
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        data = np.concatenate([self.labels, self.labels]).astype(np.int32)
        mat = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        mat.sort_indices()
        return mat

    def indicator(self, label: int) -> sp.csr_matrix:
        """Binary symmetric matrix ``A^label``."""
        return self._indicators[label - 1]

    @cached_property
    def _indicators(self) -> list[sp.csr_matrix]:
        mats = []
        for label in range(1, self.L + 1):
            mask = self.labels == label
            uu, vv = self.u[mask], self.v[mask]
            data = np.ones(2 * uu.size)
            mat = sp.csr_matrix(
                (data, (np.concatenate([uu, vv]), np.concatenate([vv, uu]))),
                shape=(self.n, self.n),
            )
            mats.append(mat)
        return mats

    def degrees(self) -> np.ndarray:
        """Number of labeled pairs at each item, e(v, V)."""
        return np.bincount(np.concatenate([self.u, self.v]), minlength=self.n)

    def neighbors(self, item: int) -> tuple[np.ndarray, np.ndarray]:
        """Labeled neighbors of ``item`` and the label of each pair."""
        mat = self.label_matrix
        lo, hi = mat.indptr[item], mat.indptr[item + 1]
        return mat.indices[lo:hi].copy(), mat.data[lo:hi].astype(np.int64)

    def dense_labels(self) -> np.ndarray:
        """Full (n, n) label matrix with 0 on unlabeled pairs. Small n only."""
        out = np.zeros((self.n, self.n), dtype=np.int64)
        out[self.u, self.v] = self.labels
        out[self.v, self.u] = self.labels
        return out

    def permuted(self, order: Sequence[int]) -> "LabelGraph":
        """Graph with items re-indexed so that new item ``order[w]`` is old ``w``."""
        order = np.asarray(order, dtype=np.int64)
        return LabelGraph(self.n, self.L, order[self.u], order[self.v], self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.L == other.L
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"LabelGraph(n={self.n}, L={self.L}, m={self.m})"


class Partition:
    """Assignment of ``n`` items to clusters ``0..k_hat-1``.

    ``k_hat`` defaults to ``max(assignment) + 1``. A partition where some
    cluster label has no member is allowed but flagged ``degenerate``.
    """

    def __init__(self, assignment, k_hat: int | None = None) -> None:
        a = np.asarray(assignment, dtype=np.int64).ravel()
        if a.size and a.min() < 0:
            raise ModelError("cluster indices must be non-negative")
        top = int(a.max()) + 1 if a.size else 0
        k_hat = top if k_hat is None else int(k_hat)
        if top > k_hat:
            raise ModelError(f"cluster index {top - 1} exceeds k_hat={k_hat}")
        self.assignment = _frozen(a)
        self.k_hat = k_hat

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k_hat)

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.sizes == 0))

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def relabeled(self, mapping: Sequence[int]) -> "Partition":
        """Partition where old cluster ``k`` becomes ``mapping[k]``."""
        mapping = np.asarray(mapping, dtype=np.int64)
        return Partition(mapping[self.assignment], self.k_hat)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.k_hat == other.k_hat and np.array_equal(self.assignment, other.assignment)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Partition(n={self.n}, k_hat={self.k_hat}, sizes={self.sizes.tolist()})"


@dataclass(frozen=True)
class AssumptionReport:
    """Tightest constants for which the model assumptions hold.

    ``eta`` bounds within-row label ratios (``inf`` when a positive entry is
    compared with a zero), ``epsilon`` is the smallest normalized squared
    separation between two clusters, and ``kappa`` is the largest exponent
    with ``n p(i,j,l) >= (n p_bar)^kappa`` for every non-zero label.
    """

    eta: float
    epsilon: float
    kappa: float
    p_bar: float


def validate(params: ModelParams) -> AssumptionReport:
    """Compute the assumption constants of ``params`` exactly."""
    p = params.user_p
    _check_rows(p)
    K, L, n = params.K, params.L, params.n

    # eta: max over i, j, k, l of p(i,j,l) / p(i,k,l); 0/0 pairs impose nothing.
    num = p[:, :, None, :]
    den = p[:, None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 1.0))
    eta = max(1.0, float(ratio.max()))

    p_bar = params.p_bar
    if K < 2 or L == 0 or p_bar == 0.0:
        epsilon = 0.0
    else:
        diff = p[:, None, :, 1:] - p[None, :, :, 1:]
        sep = (diff**2).sum(axis=(2, 3)) / p_bar**2
        epsilon = float(sep[~np.eye(K, dtype=bool)].min())

    if L == 0:
        kappa = math.inf
    else:
        nz = p[..., 1:]
        if np.any(nz == 0):
            kappa = -math.inf
        else:
            base = n * p_bar
            if base > 1:
                kappa = float(np.log(n * nz).min() / math.log(base))
            elif base == 1:
                kappa = math.inf if np.all(n * nz >= 1) else -math.inf
            else:
                # log(n p_bar) < 0: every kappa large enough works.
                kappa = math.inf
    return AssumptionReport(eta=eta, epsilon=epsilon, kappa=kappa, p_bar=p_bar)


# ---------------------------------------------------------------------------
# Scaled models p = c * f(n) / n


_ALLOWED_NAMES = {"n", "log", "sqrt", "exp", "pi", "e", "log2", "log10"}


def scaling_value(scaling: str | float, n: int) -> float:
    """Evaluate the scaling function f at ``n``.

    ``scaling`` is ``"log"``, ``"sqrt"``, ``"const"``, a number, or an
    arithmetic expression in ``n`` such as ``"log(n)**2"``.
    """
    if isinstance(scaling, (int, float)):
        return float(scaling)
    if scaling == "log":
        return math.log(n)
    if scaling == "sqrt":
        return math.sqrt(n)
    if scaling == "const":
        return 1.0
    code = compile(str(scaling), "<scaling>", "eval")
    unknown = set(code.co_names) - _ALLOWED_NAMES
    if unknown:
        raise ModelError(f"unsupported names in scaling expression: {sorted(unknown)}")
    env = {
        "n": n,
        "log": math.log,
        "sqrt": math.sqrt,
        "exp": math.exp,
        "log2": math.log2,
        "log10": math.log10,
        "pi": math.pi,
        "e": math.e,
    }
    return float(eval(code, {"__builtins__": {}}, env))


@dataclass(frozen=True)
class ScaledModelSpec:
    """Model with non-zero label probabilities ``rates * f(n) / n``.

    ``rates`` has shape (K, K, L) and holds the constants for labels 1..L.
    The named constructors reproduce the standard families (binary SBM,
    hidden community, sampled SBM, signed network).
    """

    n: int
    alpha: tuple
    rates: tuple
    scaling: str | float = "log"
    kind: str = "rates"
    constants: tuple = ()

    @classmethod
    def from_rates(cls, n, alpha, rates, scaling="log", kind="rates", constants=()):
        rates = np.asarray(rates, dtype=float)
        return cls(int(n), tuple(map(float, alpha)), _totuple(rates), scaling, kind, tuple(constants))

    @classmethod
    def planted(cls, n, K, a, b, alpha=None, scaling="log"):
        """K clusters, label-1 rate ``a`` inside clusters and ``b`` across."""
        alpha = [1.0 / K] * K if alpha is None else list(alpha)
        rates = np.full((K, K, 1), float(b))
        rates[np.arange(K), np.arange(K), 0] = float(a)
        return cls.from_rates(n, alpha, rates, scaling, "planted", (("a", a), ("b", b)))

    @classmethod
    def binary(cls, n, a, b, alpha1=0.5, scaling="log"):
        return cls.from_rates(
            n, [alpha1, 1 - alpha1], cls.planted(n, 2, a, b).rates, scaling, "binary",
            (("a", a), ("b", b), ("alpha1", alpha1)),
        )

    @classmethod
    def hidden(cls, n, alpha, a, b, scaling="log"):
        """Hidden community of relative size ``alpha`` with internal rate ``a``."""
        rates = np.full((2, 2, 1), float(b))
        rates[0, 0, 0] = float(a)
        return cls.from_rates(n, [alpha, 1 - alpha], rates, scaling, "hidden",
                              (("alpha", alpha), ("a", a), ("b", b)))

    @classmethod
    def sampled(cls, n, delta, a, b, scaling="log"):
        """Dense SBM observed on pairs sampled with probability delta f(n)/n.

        Label 0 is "not sampled", label 1 "sampled, edge present" and
        label 2 "sampled, edge absent".
        """
        rates = np.empty((2, 2, 2))
        rates[..., 0] = delta * b
        rates[..., 1] = delta * (1 - b)
        for k in range(2):
            rates[k, k, 0] = delta * a
            rates[k, k, 1] = delta * (1 - a)
        return cls.from_rates(n, [0.5, 0.5], rates, scaling, "sampled",
                              (("delta", delta), ("a", a), ("b", b)))

    @classmethod
    def signed(cls, n, a_plus, a_minus, b_plus, b_minus, scaling="log"):
        """Two balanced clusters; label 1 is '+', label 2 is '-'."""
        rates = np.empty((2, 2, 2))
        rates[..., 0], rates[..., 1] = b_plus, b_minus
        for k in range(2):
            rates[k, k, 0], rates[k, k, 1] = a_plus, a_minus
        return cls.from_rates(n, [0.5, 0.5], rates, scaling, "signed",
                              (("a_plus", a_plus), ("a_minus", a_minus),
                               ("b_plus", b_plus), ("b_minus", b_minus)))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n": self.n, "scaling": self.scaling}
        if self.kind in ("rates", "planted"):
            out["alpha"] = list(self.alpha)
        if self.kind == "rates":
            out["rates"] = _tolist(self.rates)
        out.update(dict(self.constants))
        if self.kind == "planted":
            out["K"] = len(self.alpha)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScaledModelSpec":
        kind = d.get("kind", "rates")
        n = int(d["n"])
        scaling = d.get("scaling", "log")
        if kind == "rates":
            return cls.from_rates(n, d["alpha"], d["rates"], scaling)
        if kind == "planted":
            K = int(d.get("K", len(d.get("alpha", [])) or 2))
            return cls.planted(n, K, d["a"], d["b"], d.get("alpha"), scaling)
        if kind == "binary":
            return cls.binary(n, d["a"], d["b"], d.get("alpha1", 0.5), scaling)
        if kind == "hidden":
            return cls.hidden(n, d["alpha"], d["a"], d["b"], scaling)
        if kind == "sampled":
            return cls.sampled(n, d["delta"], d["a"], d["b"], scaling)
        if kind == "signed":
            return cls.signed(n, d["a_plus"], d["a_minus"], d["b_plus"], d["b_minus"], scaling)
        raise ModelError(f"unknown scaled model kind {kind!r}")


def _totuple(a):
    return tuple(_totuple(x) for x in a) if isinstance(a, (np.ndarray, list, tuple)) else float(a)


def _tolist(t):
    return [_tolist(x) for x in t] if isinstance(t, tuple) else t


def build_scaled_model(spec: ScaledModelSpec) -> ModelParams:
    """Expand a scaled description into explicit :class:`ModelParams`.

    Raises:
        OutOfRange: if some ``c * f(n) / n`` exceeds 1 or a row of non-zero
            label probabilities sums above 1.
    """
    rates = np.asarray(spec.rates, dtype=float)
    K = len(spec.alpha)
    if rates.ndim != 3 or rates.shape[:2] != (K, K):
        raise ModelError(f"rates must have shape ({K}, {K}, L), got {rates.shape}")
    if np.any(rates < 0):
        raise OutOfRange("rates must be non-negative")
    f = scaling_value(spec.scaling, spec.n)
    nonzero = rates * f / spec.n
    if np.any(nonzero > 1):
        raise OutOfRange(f"c f(n)/n exceeds 1 (max {nonzero.max()!r})")
    total = nonzero.sum(axis=-1)
    if np.any(total > 1 + SUM_TOL):
        raise OutOfRange("non-zero label probabilities of a pair sum above 1")
    p = np.empty((K, K, rates.shape[2] + 1))
    p[..., 1:] = nonzero
    p[..., 0] = np.clip(1.0 - total, 0.0, 1.0)
    return ModelParams(spec.n, spec.alpha, p)
