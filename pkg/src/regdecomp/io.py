"""Reading and writing tensors: dense CSV matrices, tensor JSON and graph
edge lists."""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .errors import IngestError, PreconditionError
from .tensorspace import Measure, StepTensor


def tensor_to_dict(t: StepTensor) -> dict:
    return {
        "order": t.order,
        "resolution": t.resolution,
        "measure": t.measure.value,
        "values": t.flat.tolist(),
    }


def tensor_from_dict(d: dict) -> StepTensor:
    try:
        order, res = int(d["order"]), int(d["resolution"])
        measure = Measure(d.get("measure", "probability"))
        values = d["values"]
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"malformed tensor JSON: {exc}") from None
    try:
        return StepTensor.from_flat(order, res, np.asarray(values, dtype=np.float64), measure)
    except (PreconditionError, ValueError) as exc:
        raise IngestError(f"malformed tensor JSON: {exc}") from None


def write_tensor_json(t: StepTensor, path) -> None:
    with open(path, "w") as fh:
        json.dump(tensor_to_dict(t), fh)


def read_tensor_json(path) -> StepTensor:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise IngestError(f"{path}: expected a tensor object")
    return tensor_from_dict(data)


def read_rows(path) -> list:
    """Comma-separated rows of decimals (no header); rows may differ in length."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError:
                raise IngestError(f"{path}: line {lineno}: cannot parse {line!r}") from None
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return rows


def read_csv(path, measure=Measure.PROBABILITY) -> StepTensor:
    rows = read_rows(path)
    n = len(rows)
    for lineno, row in enumerate(rows, 1):
        if len(row) != n:
            raise IngestError(f"{path}: row {lineno} has {len(row)} entries, expected {n} (matrix must be square)")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise IngestError(f"{path}: non-finite entries")
    return StepTensor(arr, measure)


def write_csv(t: StepTensor, path) -> None:
    if t.order != 2:
        raise PreconditionError("CSV holds order-2 tensors only")
    with open(path, "w") as fh:
        for row in t.values:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_edge_list(path, n_vertices: Optional[int] = None) -> StepTensor:
    """Undirected graph as its {0,1} adjacency matrix under the probability measure."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise IngestError(f"{path}: line {lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise IngestError(f"{path}: line {lineno}: vertex ids must be integers") from None
            if u < 0 or v < 0:
                raise IngestError(f"{path}: line {lineno}: vertex ids are 0-indexed")
            edges.append((u, v))
    n = n_vertices if n_vertices is not None else 1 + max((max(e) for e in edges), default=-1)
    if n < 1:
        raise IngestError(f"{path}: empty graph")
    adj = np.zeros((n, n))
    for u, v in edges:
        if u >= n or v >= n:
            raise IngestError(f"{path}: vertex id out of range for {n} vertices")
        adj[u, v] = adj[v, u] = 1.0
    return StepTensor(adj, Measure.PROBABILITY)


_EXT = {".csv": "csv", ".json": "json", ".edges": "edges", ".el": "edges", ".txt": "edges"}


def ingest(path, hint: Optional[str] = None) -> StepTensor:
    fmt = hint or _EXT.get(os.path.splitext(str(path))[1].lower())
    if fmt is None:
        raise IngestError(f"{path}: cannot infer format, pass a hint (csv, json, edges)")
    if fmt == "csv":
        return read_csv(path)
    if fmt == "json":
        return read_tensor_json(path)
    if fmt == "edges":
        return read_edge_list(path)
    raise IngestError(f"unknown format {fmt!r}")


def oracle_to_dict(res, family) -> dict:
    d = tensor_to_dict(res.witness)
    d.update(family=family.label, value=res.value, exact=res.exact)
    return d


def decomposition_to_dict(dec) -> dict:
    return {
        "terms": [{"coefficient": c, "witness": tensor_to_dict(w)} for c, w in dec.terms],
        "residual": tensor_to_dict(dec.residual),
        "certified": dec.certified,
        "k_requested": dec.k_requested,
        "residual_r_bound": dec.residual_r_bound,
        "residual_norms": list(dec.residual_norms),
    }


def sparsify_to_dict(res) -> dict:
    return {
        "support": sorted(int(i) for i in res.support),
        "sparse": tensor_to_dict(res.sparse),
        "k_bound_used": res.k_bound_used,
        "achieved_error": res.achieved_error,
        "error_bound": res.error_bound,
    }
