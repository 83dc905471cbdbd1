from __future__ import annotations

import json
import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph, random_model
from lsbm import io
from lsbm.errors import DataFormatError
from lsbm.model import Partition


def test_model_roundtrip(tmp_path, rng):
    m = random_model(rng, 3, 2, n=321)
    path = tmp_path / "m.json"
    io.write_model(path, m)
    back = io.read_model(path)
    assert back.n == 321
    assert np.array_equal(back.user_p, m.user_p)
    assert np.array_equal(back.user_alpha, m.user_alpha)


def test_scaled_model_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"kind": "binary", "n": 1000, "a": 9, "b": 1}))
    m = io.read_model(path)
    assert m.K == 2 and m.L == 1


@given(st.integers(0, 2**32 - 1))
def test_graph_roundtrip(seed):
    r = np.random.default_rng(seed)
    g = random_graph(r, int(r.integers(2, 30)), int(r.integers(1, 4)), 0.3)
    text = io.graph_to_text(g)
    assert text.startswith(f"# n={g.n} L={g.L}\n")
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "g.tsv")
        io.write_graph(path, g)
        assert io.read_graph(path) == g


def test_float_format():
    assert io.fmt_float(0.1) == "0.10000000000000001"
    assert io.dumps({"x": [1.0, 2]}) == '{\n  "x": [1, 2]\n}\n'
    assert io.fmt_float(float("inf")) == "Infinity"


@pytest.mark.parametrize(
    "body,line",
    [
        ("# n=3 L=1\n0\t1\n", 2),
        ("# n=3 L=1\n0\t1\t1\n1\t0\t1\n", 3),
        ("# n=3 L=1\n0\t5\t1\n", 2),
        ("# n=3 L=1\n0\t1\tx\n", 2),
        ("# n=3 L=1\n0\t1\t2\n", 2),
    ],
)
def test_graph_errors_carry_line(tmp_path, body, line):
    path = tmp_path / "g.tsv"
    path.write_text(body)
    with pytest.raises(DataFormatError) as exc:
        io.read_graph(path)
    assert f":{line}:" in str(exc.value)


def test_graph_needs_header(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("0\t1\t1\n")
    with pytest.raises(DataFormatError):
        io.read_graph(path)


def test_partition_roundtrip_and_unassigned(tmp_path):
    path = tmp_path / "p.tsv"
    io.write_partition(path, Partition([1, 0, 1]))
    assert io.read_partition(path) == Partition([1, 0, 1])
    io.write_partition(path, np.array([0, -1, 1]))
    assert io.read_assignment(path).tolist() == [0, -1, 1]
    with pytest.raises(DataFormatError):
        io.read_partition(path)


def test_partition_missing_item(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("0\t0\n2\t1\n")
    with pytest.raises(DataFormatError):
        io.read_assignment(path)


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "a.txt", "x")
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]
