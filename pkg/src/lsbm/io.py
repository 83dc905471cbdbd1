"""Readers and writers for the model, graph and partition file formats.

* Model JSON: ``{"n", "K", "L", "alpha", "p"}`` with ``p[i][j][l]``.
* Graph file: ``u<TAB>v<TAB>l`` per line, ``u < v``, ``l >= 1``; ``#``
  starts a comment and the header comment ``# n=<n> L=<L>`` is required.
* Partition file: ``v<TAB>k`` per line, one line per item.

All writes are atomic (temporary file in the target directory, then rename).
Floats are written with 17 significant digits.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataFormatError, LSBMError
from .model import LabelGraph, ModelParams, Partition, ScaledModelSpec, build_scaled_model

UNASSIGNED = -1


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]" if _flat(obj) else (
            "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
        )
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _flat(seq) -> bool:
    return all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)


def dumps(obj, indent: int = 2) -> str:
    """JSON text with deterministic 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix="." + path.name + ".", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# model


def model_to_dict(params: ModelParams) -> dict:
    return {
        "n": params.n,
        "K": params.K,
        "L": params.L,
        "alpha": params.user_alpha.tolist(),
        "p": params.user_p.tolist(),
    }


def model_from_dict(d: dict, path=None) -> ModelParams:
    """Build a model from a plain or a scaled (``"kind"``) description."""
    try:
        if "kind" in d:
            return build_scaled_model(ScaledModelSpec.from_dict(d))
        params = ModelParams(d["n"], d["alpha"], d["p"])
    except KeyError as exc:
        raise DataFormatError(f"missing key {exc.args[0]!r}", path) from None
    except LSBMError as exc:
        raise DataFormatError(str(exc), path) from exc
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid model: {exc}", path) from exc
    for key, value in (("K", params.K), ("L", params.L)):
        if key in d and int(d[key]) != value:
            raise DataFormatError(f"{key}={d[key]} disagrees with array shapes ({value})", path)
    return params


def write_model(path, params: ModelParams) -> None:
    atomic_write(path, dumps(model_to_dict(params)))


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(exc.msg, path, exc.lineno) from None


def read_model(path) -> ModelParams:
    d = read_json(path)
    if not isinstance(d, dict):
        raise DataFormatError("model file must hold a JSON object", path)
    return model_from_dict(d, path)


# ---------------------------------------------------------------------------
# graph

_HEADER = re.compile(r"^#\s*n\s*=\s*(\d+)\s+L\s*=\s*(\d+)\s*$")


def graph_to_text(graph: LabelGraph) -> str:
    lines = [f"# n={graph.n} L={graph.L}"]
    lines.extend(f"{u}\t{v}\t{l}" for u, v, l in zip(graph.u.tolist(), graph.v.tolist(), graph.labels.tolist()))
    return "\n".join(lines) + "\n"


def write_graph(path, graph: LabelGraph) -> None:
    atomic_write(path, graph_to_text(graph))


def read_graph(path) -> LabelGraph:
    n = L = None
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER.match(line)
                if m and n is None:
                    n, L = int(m.group(1)), int(m.group(2))
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError("expected 'u<TAB>v<TAB>label'", path, lineno)
            try:
                u, v, label = (int(x) for x in parts)
            except ValueError:
                raise DataFormatError("non-integer field", path, lineno) from None
            if not u < v:
                raise DataFormatError(f"pair ({u}, {v}) must satisfy u < v", path, lineno)
            if label < 1:
                raise DataFormatError(f"label {label} must be >= 1", path, lineno)
            if n is not None and (v >= n or label > L):
                raise DataFormatError(f"pair ({u}, {v}, {label}) outside n={n}, L={L}", path, lineno)
            triples.append((u, v, label))
    if n is None:
        raise DataFormatError("missing header comment '# n=<n> L=<L>'", path)
    try:
        return LabelGraph.from_triples(n, L, triples)
    except LSBMError as exc:
        raise DataFormatError(str(exc), path) from exc


# ---------------------------------------------------------------------------
# partition


def partition_to_text(assignment) -> str:
    return "".join(f"{v}\t{k}\n" for v, k in enumerate(np.asarray(assignment).tolist()))


def write_partition(path, partition) -> None:
    """Write a :class:`Partition` or a raw assignment (``-1`` = unassigned)."""
    assignment = partition.assignment if isinstance(partition, Partition) else partition
    atomic_write(path, partition_to_text(assignment))


def read_assignment(path) -> np.ndarray:
    """Read a partition file into an array; ``-1`` marks unassigned items."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError("expected 'v<TAB>k'", path, lineno)
            try:
                v, k = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataFormatError("non-integer field", path, lineno) from None
            if v < 0 or k < UNASSIGNED:
                raise DataFormatError(f"invalid entry ({v}, {k})", path, lineno)
            if v in entries:
                raise DataFormatError(f"item {v} listed twice", path, lineno)
            entries[v] = k
    n = len(entries)
    if n == 0:
        raise DataFormatError("empty partition", path)
    if max(entries) != n - 1:
        raise DataFormatError(f"items must be exactly 0..{n - 1}", path)
    out = np.empty(n, dtype=np.int64)
    for v, k in entries.items():
        out[v] = k
    return out


def read_partition(path) -> Partition:
    assignment = read_assignment(path)
    if np.any(assignment == UNASSIGNED):
        raise DataFormatError("partition has unassigned items (-1)", path)
    return Partition(assignment)
