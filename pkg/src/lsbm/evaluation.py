"""Scoring partitions, well-behaved item sets and seed sweeps."""

from __future__ import annotations

import csv
import io as _io
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .divergence import divergence, error_floor
from .errors import LSBMError, SizeMismatch, ThresholdUndefined
from .model import LabelGraph, ModelParams, Partition, validate
from .refinement import EstimatedParams, score_table, spectral_partition
from .sampler import sample
from .spectral import SpectralConfig

EXHAUSTIVE_MAX = 8

CSV_COLUMNS = (
    "model_id", "seed", "n", "K", "k_hat", "errors_spectral", "errors_final",
    "d_value", "floor_s", "runtime_ms", "status",
)


def contingency(est: Partition, truth: Partition) -> np.ndarray:
    """Square table ``C[a, b]`` = items in estimated a and true b, zero padded."""
    if est.n != truth.n:
        raise SizeMismatch(f"partitions have {est.n} and {truth.n} items")
    size = max(est.k_hat, truth.k_hat, 1)
    table = np.zeros((size, size), dtype=np.int64)
    np.add.at(table, (est.assignment, truth.assignment), 1)
    return table


def _best_exhaustive(table: np.ndarray) -> tuple[int, np.ndarray]:
    size = table.shape[0]
    perms = np.array(list(itertools.permutations(range(size))), dtype=np.int64)
    agree = table[np.arange(size), perms].sum(axis=1)
    best = int(np.argmax(agree))
    return int(agree[best]), perms[best]


def _best_matching(table: np.ndarray) -> tuple[int, np.ndarray]:
    rows, cols = linear_sum_assignment(table, maximize=True)
    match = np.empty(table.shape[0], dtype=np.int64)
    match[rows] = cols
    return int(table[rows, cols].sum()), match


def misclassified(est: Partition, truth: Partition, method: str = "auto") -> tuple[int, np.ndarray]:
    """Errors of ``est`` up to the best relabeling of its clusters.

    Args:
        est: estimated partition.
        truth: reference partition over the same items.
        method: ``"exhaustive"``, ``"matching"`` or ``"auto"`` (exhaustive
            when both sides have at most eight clusters).

    Returns:
        ``(count, gamma)`` where ``gamma[a]`` is the true cluster matched to
        estimated cluster ``a``; indices past a side's cluster count stand for
        empty padding clusters.
    """
    table = contingency(est, truth)
    if method == "auto":
        method = "exhaustive" if table.shape[0] <= EXHAUSTIVE_MAX else "matching"
    if method == "exhaustive":
        agree, gamma = _best_exhaustive(table)
    elif method == "matching":
        agree, gamma = _best_matching(table)
    else:
        raise ValueError(f"unknown method {method!r}")
    return est.n - agree, gamma


def aligned(est: Partition, truth: Partition) -> Partition:
    """``est`` relabeled onto the true cluster indices by the best matching."""
    _, gamma = misclassified(est, truth)
    return Partition(gamma[est.assignment], max(est.k_hat, truth.k_hat))


@dataclass(frozen=True)
class HSetReport:
    """Per-item well-behavedness flags.

    ``degree_ok``: labeled-pair count within the degree bound.
    ``margin_ok``: the true cluster beats every other by the likelihood
    margin. ``in_h``: member of the set left after peeling, whose items all
    satisfy the outside-edge bound. ``outside`` is the number of items not in
    that set.
    """

    degree_ok: np.ndarray
    margin_ok: np.ndarray
    in_h: np.ndarray
    margin: np.ndarray
    degree_bound: float
    margin_bound: float
    outside_bound: float

    @property
    def outside(self) -> int:
        return int(np.count_nonzero(~self.in_h))


def h_set(graph: LabelGraph, truth: Partition, params: ModelParams) -> HSetReport:
    """Flag items that are well behaved with respect to the true parameters.

    The set is grown from the items failing the degree or margin condition by
    repeatedly adding any item with more than ``2 log(n p_bar)^2`` labeled
    pairs into it; the complement is the returned set. This closure is the
    constructive set from the analysis, a subset of the largest valid set.

    Raises:
        ThresholdUndefined: if ``n p_bar <= 1``.
    """
    if graph.n != truth.n or graph.n != params.n:
        raise SizeMismatch("graph, partition and model disagree on n")
    n = graph.n
    base = n * params.p_bar
    if base <= 1:
        raise ThresholdUndefined(f"n * p_bar = {base!r} <= 1")
    report = validate(params)
    degree_bound = 10.0 * report.eta * base * params.L
    margin_bound = base / math.log(base) ** 4
    outside_bound = 2.0 * math.log(base) ** 2

    deg = graph.degrees()
    degree_ok = deg <= degree_bound

    # zero-probability labels get a huge finite penalty instead of -inf
    p = np.maximum(params.user_p, np.finfo(float).tiny)
    scores = score_table(graph, truth, EstimatedParams(p))
    own = scores[np.arange(n), truth.assignment]
    others = scores.copy()
    others[np.arange(n), truth.assignment] = -np.inf
    margin = own - others.max(axis=1) if params.K > 1 else np.full(n, np.inf)
    margin_ok = margin >= margin_bound

    Z = ~(degree_ok & margin_ok)
    adj = _adjacency(graph)
    while True:
        into = np.asarray(adj @ Z.astype(float)).ravel()
        grow = (~Z) & (into > outside_bound)
        if not grow.any():
            break
        Z |= grow
    return HSetReport(degree_ok, margin_ok, ~Z, margin, degree_bound, margin_bound, outside_bound)


def _adjacency(graph: LabelGraph):
    lab = graph.label_matrix
    return sp.csr_matrix((np.ones(lab.data.size), lab.indices, lab.indptr), shape=lab.shape)


@dataclass
class ExperimentRecord:
    """Outcome of one (model, seed) run; error fields are -1 when a stage failed."""

    model_id: str
    seed: int
    n: int
    K: int
    k_hat: int = -1
    errors_spectral: int = -1
    errors_final: int = -1
    d_value: float = math.nan
    floor_s: float = math.nan
    runtime_ms: float | None = None
    status: str = "ok"
    trace: list = field(default_factory=list)

    def row(self) -> list:
        from .io import fmt_float

        runtime = "" if self.runtime_ms is None else fmt_float(self.runtime_ms)
        return [
            self.model_id, self.seed, self.n, self.K, self.k_hat, self.errors_spectral,
            self.errors_final, fmt_float(self.d_value), fmt_float(self.floor_s), runtime, self.status,
        ]

    def to_dict(self) -> dict:
        return dict(zip(CSV_COLUMNS, [
            self.model_id, self.seed, self.n, self.K, self.k_hat, self.errors_spectral,
            self.errors_final, self.d_value, self.floor_s, self.runtime_ms, self.status,
        ]), trace=list(self.trace))


def parse_seeds(spec) -> list[int]:
    """``"A..B"`` (inclusive), a single int or a list of ints."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, str):
        if ".." not in spec:
            return [int(spec)]
        a, b = spec.split("..", 1)
        a, b = int(a), int(b)
        if b < a:
            raise ValueError(f"empty or reversed seed range {spec!r}")
        return list(range(a, b + 1))
    return [int(x) for x in spec]


def run_one(params: ModelParams, seed: int, cfg: SpectralConfig, model_id: str = "0",
            d_value: float | None = None, timing: bool = False,
            reestimate: bool = False) -> ExperimentRecord:
    """Sample an instance, run both stages and score them against the truth."""
    if d_value is None:
        try:
            d_value = divergence(params).d_value if params.K > 1 else math.inf
        except LSBMError:
            d_value = math.nan
    rec = ExperimentRecord(model_id, int(seed), params.n, params.K, d_value=d_value,
                           floor_s=error_floor(params.n, d_value) if not math.isnan(d_value) else math.nan)
    start = time.perf_counter()
    try:
        truth, graph = sample(params, seed)
        res = spectral_partition(graph, seed, cfg, truth=truth, reestimate=reestimate)
        rec.k_hat = res.k_hat
        rec.errors_spectral = misclassified(res.initial, truth)[0]
        rec.errors_final = misclassified(res.final, truth)[0]
        rec.trace = list(res.refine.error_trace or [])
    except LSBMError as exc:
        rec.status = type(exc).__name__
    if timing:
        rec.runtime_ms = (time.perf_counter() - start) * 1000.0
    return rec


def _run_task(task):
    return run_one(*task)


def run_experiment(models, seeds, cfg: SpectralConfig | None = None, jobs: int = 1,
                   timing: bool = False, model_ids=None, reestimate: bool = False) -> list[ExperimentRecord]:
    """Run every (model, seed) pair; records ordered by model then seed.

    Stage failures are recorded in the ``status`` field instead of aborting.
    ``jobs > 1`` fans out over processes; each run depends only on its seed,
    so the records are the same for any ``jobs``.
    """
    cfg = SpectralConfig() if cfg is None else cfg
    models = list(models)
    ids = [str(i) for i in range(len(models))] if model_ids is None else [str(x) for x in model_ids]
    seeds = list(seeds)
    tasks = []
    for mid, params in zip(ids, models):
        try:
            d = divergence(params).d_value if params.K > 1 else math.inf
        except LSBMError:
            d = math.nan
        tasks.extend((params, s, cfg, mid, d, timing, reestimate) for s in seeds)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


def records_to_csv(records) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()
