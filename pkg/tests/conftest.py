from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lsbm.model import LabelGraph, ModelParams

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def random_rows(rng, K, L, lo=1e-4, hi=1e-2):
    """Symmetric (K, K, L+1) label tensor with non-zero labels in [lo, hi]."""
    p = np.zeros((K, K, L + 1))
    for i in range(K):
        for j in range(i, K):
            v = rng.uniform(lo, hi, size=L)
            p[i, j, 1:] = v
            p[j, i, 1:] = v
    p[..., 0] = 1.0 - p[..., 1:].sum(axis=-1)
    return p


def random_model(rng, K, L, n=1000, lo=1e-4, hi=1e-2, alpha=None):
    if alpha is None:
        alpha = rng.dirichlet(np.ones(K)) * 0.8 + 0.2 / K
        alpha = alpha / alpha.sum()
    return ModelParams(n, alpha, random_rows(rng, K, L, lo, hi))


def random_graph(rng, n, L, density):
    u, v = np.triu_indices(n, k=1)
    keep = rng.random(u.size) < density
    labels = rng.integers(1, L + 1, size=int(keep.sum()))
    return LabelGraph(n, L, u[keep], v[keep], labels)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, shown after the test session
ACCEPTANCE: dict[int, str] = {}


def report(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
