"""Part 1 of Spectral Partition: rank estimation and initial clusters.

Steps: estimate the label density, aggregate the label matrices with random
weights, trim the highest-degree items, extract leading singular directions
with a deflated power method until the singular value estimate drops below a
threshold, then group items by Euclidean balls around random reference items
in the rank-reduced embedding.

Three algorithm constants depend on ``n p_tilde``:

* rank threshold ``sqrt(n p) log(n p)``,
* squared ball radius ``n p^2 / log(n p)``,
* minimum cluster size ``log(n p)^4 / p``.

:class:`SpectralConfig` exposes a multiplier and a log power for each; the
defaults reproduce the expressions above. They are asymptotic and at
``n p`` below a few hundred the size bound exceeds ``n`` itself, so
:meth:`SpectralConfig.desk` provides finite-n constants.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NoClusters, ThresholdUndefined
from .model import LabelGraph
from .rng import stream


@dataclass(frozen=True)
class SpectralConfig:
    """Constants of the spectral stage (defaults: the asymptotic ones)."""

    power_iterations_factor: float = 2.0
    threshold_multiplier: float = 1.0
    threshold_log_power: float = 1.0
    radius_multiplier: float = 1.0
    radius_log_power: float = 1.0
    size_multiplier: float = 1.0
    size_log_power: float = 4.0
    reference_factor: float = 1.0
    normalize_weights: bool = False
    max_rank_cap: int | None = None

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name.endswith("log_power") or isinstance(value, bool) or value is None:
                continue
            if not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value!r}")

    @classmethod
    def desk(cls) -> "SpectralConfig":
        """Constants calibrated for n in the thousands to tens of thousands.

        The rank threshold drops its log factor (2.5 sqrt(n p) sits between
        the noise edge 2 sqrt(n p) and the cluster singular values), the
        weights are rescaled so the largest is 1 (a common scale factor does
        not move singular vectors but does move singular values against the
        fixed threshold), the size bound becomes ``2 / p`` and three times
        more references are drawn.
        """
        return cls(
            threshold_multiplier=2.5,
            threshold_log_power=0.0,
            size_multiplier=2.0,
            size_log_power=0.0,
            reference_factor=3.0,
            normalize_weights=True,
        )

    @classmethod
    def preset(cls, name: str) -> "SpectralConfig":
        if name == "asymptotic":
            return cls()
        if name == "desk":
            return cls.desk()
        raise ValueError(f"unknown spectral preset {name!r}")

    @classmethod
    def from_dict(cls, d: dict | str | None) -> "SpectralConfig":
        if d is None:
            return cls()
        if isinstance(d, str):
            return cls.preset(d)
        d = dict(d)
        base = cls.preset(d.pop("preset", "asymptotic"))
        return dataclasses.replace(base, **d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def rank_threshold(self, base: float) -> float:
        return self.threshold_multiplier * math.sqrt(base) * math.log(base) ** self.threshold_log_power

    def radius2(self, n: int, p_tilde: float) -> float:
        base = n * p_tilde
        return self.radius_multiplier * n * p_tilde**2 / math.log(base) ** self.radius_log_power

    def size_bound(self, n: int, p_tilde: float) -> float:
        base = n * p_tilde
        return self.size_multiplier * math.log(base) ** self.size_log_power / p_tilde

    def n_references(self, n: int) -> int:
        return max(1, math.ceil(self.reference_factor * math.log(n)))

    def rank_cap(self, n: int) -> int:
        return self.max_rank_cap or math.ceil(math.sqrt(n))


def estimate_density(graph: LabelGraph) -> float:
    """Fraction of ordered item pairs carrying a non-zero label, 2m / (n(n-1))."""
    n = graph.n
    if n < 2:
        raise ValueError("density needs n >= 2")
    return 2.0 * graph.m / (n * (n - 1))


def draw_weights(L: int, seed: int, normalize: bool = False) -> np.ndarray:
    """i.i.d. uniform [0, 1] label weights from the ``weights`` stream."""
    w = stream(seed, "weights").uniform(0.0, 1.0, size=L)
    if normalize and w.max() > 0:
        w = w / w.max()
    return w


def aggregate(graph: LabelGraph, weights) -> sp.csr_matrix:
    """``A = sum_l w_l A^l`` as a symmetric CSR matrix with zero diagonal."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (graph.L,):
        raise ValueError(f"need {graph.L} weights, got shape {weights.shape}")
    lab = graph.label_matrix
    A = sp.csr_matrix((weights[lab.data - 1], lab.indices, lab.indptr), shape=lab.shape)
    A.eliminate_zeros()
    return A


def trim_count(n: int, p_tilde: float) -> int:
    return math.floor(n * math.exp(-n * p_tilde))


def trim(A: sp.csr_matrix, graph: LabelGraph, p_tilde: float) -> tuple[np.ndarray, sp.csr_matrix]:
    """Drop the ``floor(n exp(-n p_tilde))`` items with most labeled pairs.

    Among items of equal degree the larger index is dropped first. Returns
    the sorted kept items Gamma and the principal submatrix on Gamma.
    """
    n = graph.n
    count = min(trim_count(n, p_tilde), n)
    deg = graph.degrees()
    order = np.lexsort((-np.arange(n), -deg))
    removed = np.zeros(n, dtype=bool)
    removed[order[:count]] = True
    gamma = np.flatnonzero(~removed)
    A = sp.csr_matrix(A)
    return gamma, A[gamma][:, gamma].tocsr()


@dataclass(frozen=True)
class PowerResult:
    U: np.ndarray
    V: np.ndarray
    k_tilde: int
    singular_values: np.ndarray
    chi_trace: np.ndarray
    threshold: float
    rank_cap_reached: bool


def power_svd(A, p_tilde: float, cfg: SpectralConfig, gen: np.random.Generator,
              n: int | None = None) -> PowerResult:
    """Leading singular directions of symmetric ``A`` with value thresholding.

    One direction at a time: a Gaussian start vector is multiplied by ``A``
    ``ceil(factor ln n)`` times, renormalized and projected off the already
    accepted directions after every product, and accepted while
    ``chi = ||A u||`` stays at or above the rank threshold.

    Args:
        A: symmetric (trimmed) matrix, sparse or dense.
        p_tilde: density estimate of the full graph.
        cfg: spectral constants.
        gen: generator for start vectors.
        n: item count used in the constants (defaults to ``A.shape[0]``).

    Raises:
        ThresholdUndefined: if ``n p_tilde <= 1``.
    """
    size = A.shape[0]
    n = size if n is None else int(n)
    base = n * p_tilde
    if base <= 1:
        raise ThresholdUndefined(f"n * p_tilde = {base!r} <= 1")
    threshold = cfg.rank_threshold(base)
    iters = math.ceil(cfg.power_iterations_factor * math.log(n))
    cap = cfg.rank_cap(n)
    U = np.zeros((size, 0))
    chis = []
    cap_hit = False

    def deflate(y):
        y = y - U @ (U.T @ y)
        return y - U @ (U.T @ y)

    while True:
        if U.shape[1] >= cap:
            cap_hit = True
            break
        if U.shape[1] >= size:
            break
        x = gen.standard_normal(size)
        chi = 0.0
        for _ in range(iters):
            y = A @ x
            scale = np.linalg.norm(y)
            y = deflate(y)
            nrm = np.linalg.norm(y)
            if scale == 0 or nrm <= 1e-12 * scale:
                x = None
                break
            x = y / nrm
        if x is not None:
            x = deflate(x)
            nrm = np.linalg.norm(x)
            if nrm > 0:
                x /= nrm
                chi = float(np.linalg.norm(A @ x))
        chis.append(chi)
        if chi < threshold:
            break
        U = np.column_stack([U, x])
    V = np.asarray((A @ U).T) if U.shape[1] else np.zeros((0, size))
    k = U.shape[1]
    return PowerResult(U, V, k, np.array(chis[:k]), np.array(chis), threshold, cap_hit)


@dataclass(frozen=True)
class SpectralOutput:
    """Result of the spectral stage.

    ``labels`` gives the cluster of each item of ``gamma`` (positions match);
    ``trimmed_labels`` gives the nearest-reference cluster of each trimmed
    item, used to seed the refinement stage.
    """

    k_hat: int
    labels: np.ndarray
    gamma: np.ndarray
    references: np.ndarray
    reference_sample: np.ndarray
    radius2: float
    size_bound: float
    extracted_sizes: tuple
    n: int = 0
    trimmed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    trimmed_labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    k_tilde: int = 0
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    chi_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    threshold: float = math.nan
    rank_cap_reached: bool = False
    p_tilde: float = math.nan
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def clusters(self) -> list[np.ndarray]:
        """Item indices of S_1..S_k_hat (members of Gamma only)."""
        return [self.gamma[self.labels == k] for k in range(self.k_hat)]

    def gamma_assignment(self) -> np.ndarray:
        """Length-n labels with -1 for trimmed items."""
        out = np.full(self.n, -1, dtype=np.int64)
        out[self.gamma] = self.labels
        return out

    def full_assignment(self) -> np.ndarray:
        """Length-n labels with trimmed items at their nearest reference."""
        out = self.gamma_assignment()
        out[self.trimmed] = self.trimmed_labels
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k_hat": self.k_hat,
            "k_tilde": self.k_tilde,
            "p_tilde": self.p_tilde,
            "threshold": self.threshold,
            "singular_values": self.singular_values.tolist(),
            "chi_trace": self.chi_trace.tolist(),
            "rank_cap_reached": self.rank_cap_reached,
            "weights": self.weights.tolist(),
            "radius2": self.radius2,
            "size_bound": self.size_bound,
            "extracted_sizes": list(self.extracted_sizes),
            "references": self.references.tolist(),
            "reference_sample": self.reference_sample.tolist(),
            "cluster_sizes": [int(c.size) for c in self.clusters()],
            "trimmed": self.trimmed.tolist(),
        }


def _nearest(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return np.argmin(d2, axis=1)


def reference_cluster(V_rows, p_tilde: float, cfg: SpectralConfig, gen: np.random.Generator,
                      n: int | None = None) -> SpectralOutput:
    """Greedy ball clustering of the embedded items.

    ``V_rows`` has one row per item of Gamma (the transposed V-hat). Balls of
    squared radius ``radius2`` are formed around ``ceil(factor ln n)``
    reference items drawn without replacement. The largest ball not yet
    covered becomes the next cluster while its uncovered size stays at least
    the size bound; the extraction that fails the bound is discarded and its
    items join the leftovers, which go to the nearest accepted reference.

    Raises:
        NoClusters: if no ball meets the size bound.
    """
    V_rows = np.asarray(V_rows, dtype=float)
    size = V_rows.shape[0]
    n = size if n is None else int(n)
    if size == 0:
        raise NoClusters("no items to cluster")
    if n * p_tilde <= 1:
        raise ThresholdUndefined(f"n * p_tilde = {n * p_tilde!r} <= 1")
    radius2 = cfg.radius2(n, p_tilde)
    bound = cfg.size_bound(n, p_tilde)
    refs = gen.choice(size, size=min(size, cfg.n_references(n)), replace=False)
    d2 = ((V_rows[refs][:, None, :] - V_rows[None, :, :]) ** 2).sum(axis=-1)
    balls = d2 <= radius2

    used = np.zeros(size, dtype=bool)
    extracted, centers, sizes = [], [], []
    rho = size
    while rho >= bound:
        avail = (balls & ~used).sum(axis=1)
        r = int(np.argmax(avail))
        members = balls[r] & ~used
        rho = int(members.sum())
        extracted.append(members)
        centers.append(int(refs[r]))
        sizes.append(rho)
        used |= members
    k_hat = len(extracted) - 1
    if k_hat <= 0:
        raise NoClusters(
            f"no reference ball reaches the size bound {bound:.6g} (|Gamma| = {size})"
        )
    labels = np.full(size, -1, dtype=np.int64)
    for k in range(k_hat):
        labels[extracted[k]] = k
    centers = np.array(centers[:k_hat], dtype=np.int64)
    left = labels < 0
    if left.any():
        labels[left] = _nearest(V_rows[left], V_rows[centers])
    return SpectralOutput(
        k_hat=k_hat,
        labels=labels,
        gamma=np.arange(size),
        references=centers,
        reference_sample=np.asarray(refs, dtype=np.int64),
        radius2=radius2,
        size_bound=bound,
        extracted_sizes=tuple(sizes),
        n=size,
        k_tilde=V_rows.shape[1],
        p_tilde=p_tilde,
    )


def spectral_stage(graph: LabelGraph, cfg: SpectralConfig, seed: int) -> SpectralOutput:
    """Run density estimation, weighting, trimming, power method and clustering.

    Randomness comes from the ``weights``, ``power`` and ``references``
    streams of ``seed``.
    """
    n = graph.n
    p_tilde = estimate_density(graph)
    if n * p_tilde <= 1:
        raise ThresholdUndefined(f"n * p_tilde = {n * p_tilde!r} <= 1")
    weights = draw_weights(graph.L, seed, cfg.normalize_weights)
    A = aggregate(graph, weights)
    gamma, A_gamma = trim(A, graph, p_tilde)
    power = power_svd(A_gamma, p_tilde, cfg, stream(seed, "power"), n=n)
    V_rows = power.V.T
    out = reference_cluster(V_rows, p_tilde, cfg, stream(seed, "references"), n=n)

    trimmed = np.setdiff1d(np.arange(n), gamma)
    if trimmed.size:
        if power.k_tilde:
            cols = np.asarray((A[gamma][:, trimmed].T @ power.U))
            trimmed_labels = _nearest(cols, V_rows[out.references])
        else:
            largest = int(np.argmax(np.bincount(out.labels, minlength=out.k_hat)))
            trimmed_labels = np.full(trimmed.size, largest, dtype=np.int64)
    else:
        trimmed_labels = np.zeros(0, dtype=np.int64)

    return dataclasses.replace(
        out,
        n=n,
        gamma=gamma,
        references=gamma[out.references],
        reference_sample=gamma[out.reference_sample],
        trimmed=trimmed,
        trimmed_labels=np.asarray(trimmed_labels, dtype=np.int64),
        k_tilde=power.k_tilde,
        singular_values=power.singular_values,
        chi_trace=power.chi_trace,
        threshold=power.threshold,
        rank_cap_reached=power.rank_cap_reached,
        weights=weights,
    )
