"""Reading and writing models as JSON documents.

A model file looks like::

    {
      "format_version": "1",
      "groups": {"a0": "male", "a1": "female"},
      "loss": {"kind": "zero_one"},
      "nodes": [
        {"id": "A", "role": "sensitive", "domain": ["male", "female"], "parents": [],
         "spec": {"cpt": [{"given": [], "probs": [0.5, 0.5]}]}},
        ...
        {"id": "Yhat", "role": "prediction", "domain": [0, 1], "parents": ["D"]},
        {"id": "U", "role": "utility", "parents": ["Y", "Yhat"]}
      ]
    }

Chance nodes carry either ``{"cpt": rows}`` or ``{"structural": {"exogenous":
{"domain", "probs"}, "table": rows}}``; each row names its parent assignment
in ``given``.  A file whose chance nodes have no ``spec`` describes a graph
only.  :func:`dumps_model` is canonical: sorted keys, two-space indent and
shortest round-trip floats, so emit -> parse -> emit is byte-identical.
"""

from __future__ import annotations

import itertools
import json
import re
from pathlib import Path
from typing import Any

import numpy as np

from .graph import GraphError, NodeRole, SLGraph, validate_sl_graph
from .scm import (ExogenousSpec, GroupSpec, LossSpec, ModelError, StructuralModel, cpt_array,
                  cpt_to_structural)

FORMAT_VERSION = "1"
ROW_SUM_TOL = 1e-9


class ModelFileError(ModelError):
    """Problem with a model file, anchored to a line of the source text."""

    def __init__(self, message: str, line: int = 1, source: str = "<model>"):
        self.message, self.line, self.source = message, line, source
        super().__init__(f"{source}:{line}: {message}")


class _Doc:
    def __init__(self, text: str, source: str):
        self.text, self.source = text, source

    def line_of(self, node_id: str | None = None, key: str | None = None) -> int:
        pattern = None
        if node_id is not None:
            pattern = r'"id"\s*:\s*' + re.escape(json.dumps(node_id))
        elif key is not None:
            pattern = re.escape(json.dumps(key)) + r"\s*:"
        if pattern:
            m = re.search(pattern, self.text)
            if m:
                return self.text.count("\n", 0, m.start()) + 1
        return 1

    def error(self, message: str, node_id: str | None = None, key: str | None = None) -> ModelFileError:
        return ModelFileError(message, self.line_of(node_id, key), self.source)


def _value(v: Any):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise TypeError(f"domain values must be numbers or strings, got {v!r}")
    return v


def _parse_json(text: str, source: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    if not isinstance(data, dict):
        raise ModelFileError("top level must be a JSON object", 1, source)
    return data


def _parse_nodes(doc: _Doc, data: dict) -> list[dict]:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise doc.error(f"format_version must be {FORMAT_VERSION!r}, got {version!r}", key="format_version")
    nodes = data.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise doc.error("'nodes' must be a non-empty list", key="nodes")
    seen = set()
    for n in nodes:
        if not isinstance(n, dict) or not isinstance(n.get("id"), str):
            raise doc.error("every node needs a string 'id'", key="nodes")
        nid = n["id"]
        if nid in seen:
            raise doc.error(f"duplicate node id {nid!r}", node_id=nid)
        seen.add(nid)
        try:
            NodeRole(n.get("role"))
        except ValueError:
            raise doc.error(f"node {nid}: unknown role {n.get('role')!r}", node_id=nid) from None
        parents = n.get("parents", [])
        if not isinstance(parents, list) or not all(isinstance(p, str) for p in parents):
            raise doc.error(f"node {nid}: 'parents' must be a list of ids", node_id=nid)
    for n in nodes:
        for p in n.get("parents", []):
            if p not in seen:
                raise doc.error(f"node {n['id']}: unknown parent {p!r}", node_id=n["id"])
    return nodes


def _graph(doc: _Doc, nodes: list[dict]) -> SLGraph:
    try:
        graph = SLGraph([(n["id"], n["role"]) for n in nodes],
                        [(p, n["id"]) for n in nodes for p in n.get("parents", [])])
    except GraphError as exc:
        raise doc.error(str(exc), key="nodes") from None
    report = validate_sl_graph(graph)
    if not report.ok:
        raise doc.error("; ".join(report.violations), key="nodes")
    return graph


def parse_graph(text: str, source: str = "<model>") -> SLGraph:
    """Graph described by a model file (specs, if present, are ignored)."""
    doc = _Doc(text, source)
    data = _parse_json(text, source)
    return _graph(doc, _parse_nodes(doc, data))


def _rows(doc: _Doc, nid: str, rows, parents: list[str], domains: dict, field: str) -> dict[tuple, list]:
    if not isinstance(rows, list):
        raise doc.error(f"node {nid}: {field} rows must be a list", node_id=nid)
    out = {}
    for row in rows:
        if not isinstance(row, dict) or not isinstance(row.get("given"), list):
            raise doc.error(f"node {nid}: each row needs a 'given' list", node_id=nid)
        key = tuple(row["given"])
        if len(key) != len(parents):
            raise doc.error(f"node {nid}: row {list(key)} has {len(key)} parent values, expected {len(parents)}",
                            node_id=nid)
        for p, v in zip(parents, key):
            if v not in domains[p]:
                raise doc.error(f"node {nid}: row {list(key)} uses {v!r}, outside the domain of {p}", node_id=nid)
        if key in out:
            raise doc.error(f"node {nid}: duplicate row {list(key)}", node_id=nid)
        if not isinstance(row.get(field), list):
            raise doc.error(f"node {nid}: row {list(key)} needs a '{field}' list", node_id=nid)
        out[key] = row[field]
    for key in itertools.product(*(domains[p] for p in parents)):
        if key not in out:
            raise doc.error(f"node {nid}: missing row for parents {list(key)}", node_id=nid)
    return out


def _loss(doc: _Doc, data: dict) -> LossSpec:
    spec = data.get("loss", {"kind": "zero_one"})
    if not isinstance(spec, dict):
        raise doc.error("'loss' must be an object", key="loss")
    kind = spec.get("kind")
    if kind == "table":
        entries = spec.get("table")
        if not isinstance(entries, list) or not entries:
            raise doc.error("table loss needs a non-empty 'table' list", key="loss")
        try:
            table = {(e["y"], e["yhat"]): float(e["utility"]) for e in entries}
        except (KeyError, TypeError, ValueError):
            raise doc.error("loss table entries need 'y', 'yhat' and numeric 'utility'", key="loss") from None
        return LossSpec("table", table)
    if kind not in ("zero_one", "mse"):
        raise doc.error(f"unknown loss kind {kind!r}", key="loss")
    return LossSpec(kind)


def parse_model(text: str, source: str = "<model>") -> StructuralModel:
    """Parse and validate a model file; errors carry the offending line."""
    doc = _Doc(text, source)
    data = _parse_json(text, source)
    nodes = _parse_nodes(doc, data)
    graph = _graph(doc, nodes)
    domains: dict[str, tuple] = {}
    for n in nodes:
        role = NodeRole(n["role"])
        if role is NodeRole.UTILITY:
            continue
        dom = n.get("domain")
        if not isinstance(dom, list):
            raise doc.error(f"node {n['id']}: 'domain' must be a list", node_id=n["id"])
        try:
            dom = tuple(_value(v) for v in dom)
        except TypeError as exc:
            raise doc.error(f"node {n['id']}: {exc}", node_id=n["id"]) from None
        if len(set(dom)) != len(dom):
            raise doc.error(f"node {n['id']}: domain has repeated values", node_id=n["id"])
        if not dom and role is not NodeRole.PREDICTION:
            raise doc.error(f"node {n['id']}: domain must not be empty", node_id=n["id"])
        domains[n["id"]] = dom

    cpts, structural = {}, {}
    for n in nodes:
        nid, role = n["id"], NodeRole(n["role"])
        if role in (NodeRole.PREDICTION, NodeRole.UTILITY):
            continue
        spec = n.get("spec")
        parents = graph.parents(nid)
        if list(n.get("parents", [])) != list(parents):
            # rows follow the graph's canonical parent order (declaration order of nodes)
            raise doc.error(f"node {nid}: list parents in node declaration order {list(parents)}", node_id=nid)
        if not isinstance(spec, dict) or len(spec) != 1 or next(iter(spec)) not in ("cpt", "structural"):
            raise doc.error(f"node {nid}: 'spec' must be {{\"cpt\": ...}} or {{\"structural\": ...}}", node_id=nid)
        if "cpt" in spec:
            rows = _rows(doc, nid, spec["cpt"], parents, domains, "probs")
            for key, probs in rows.items():
                if len(probs) != len(domains[nid]) or not all(isinstance(p, (int, float)) for p in probs):
                    raise doc.error(f"node {nid}: row {list(key)} needs {len(domains[nid])} probabilities",
                                    node_id=nid)
                if min(probs) < 0 or abs(sum(probs) - 1.0) > ROW_SUM_TOL:
                    raise doc.error(f"node {nid}: row {list(key)} probabilities must be non-negative and sum to 1",
                                    node_id=nid)
            cpts[nid] = rows
        else:
            body = spec["structural"]
            try:
                exo = ExogenousSpec(tuple(body["exogenous"]["domain"]),
                                    tuple(float(p) for p in body["exogenous"]["probs"]))
            except (KeyError, TypeError, ValueError, ModelError) as exc:
                raise doc.error(f"node {nid}: bad exogenous spec ({exc})", node_id=nid) from None
            rows = _rows(doc, nid, body.get("table"), parents, domains, "values")
            shape = tuple(len(domains[p]) for p in parents) + (len(exo.domain),)
            table = np.empty(shape, dtype=np.int64)
            for key, values in rows.items():
                if len(values) != len(exo.domain):
                    raise doc.error(f"node {nid}: row {list(key)} needs one value per exogenous cell", node_id=nid)
                idx = tuple(domains[p].index(v) for p, v in zip(parents, key))
                for e, v in enumerate(values):
                    if v not in domains[nid]:
                        raise doc.error(f"node {nid}: value {v!r} is outside its domain", node_id=nid)
                    table[idx + (e,)] = domains[nid].index(v)
            structural[nid] = (exo, table)

    loss = _loss(doc, data)
    groups = None
    if "groups" in data:
        g = data["groups"]
        if not isinstance(g, dict) or "a0" not in g or "a1" not in g:
            raise doc.error("'groups' needs 'a0' and 'a1'", key="groups")
        try:
            groups = GroupSpec(g["a0"], g["a1"])
        except ModelError as exc:
            raise doc.error(str(exc), key="groups") from None
    functions, exogenous, origin, tables = {}, {}, {}, {}
    try:
        for v, rows in cpts.items():
            arr = cpt_array(graph, domains, v, rows)
            exogenous[v], functions[v] = cpt_to_structural(arr)
            origin[v], tables[v] = "cpt", arr
        for v, (exo, table) in structural.items():
            exogenous[v], functions[v], origin[v] = exo, table, "structural"
        return StructuralModel(graph, domains, exogenous, functions, loss, groups, origin, tables)
    except ModelError as exc:
        raise doc.error(str(exc), key="groups" if "groups" in str(exc) else "nodes") from None


def load_model(path: str | Path) -> StructuralModel:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), str(path))


def load_graph(path: str | Path) -> SLGraph:
    path = Path(path)
    return parse_graph(path.read_text(encoding="utf-8"), str(path))


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def model_to_dict(model: StructuralModel) -> dict:
    g = model.graph
    nodes = []
    for v in g.nodes:
        role = g.role(v)
        entry: dict[str, Any] = {"id": v, "role": role.value, "parents": list(g.parents(v))}
        if role is not NodeRole.UTILITY:
            entry["domain"] = [_plain(x) for x in model.domains.get(v, ())]
        if role not in (NodeRole.PREDICTION, NodeRole.UTILITY):
            keys = list(itertools.product(*(model.domains[p] for p in g.parents(v))))
            if v in model.cpts:
                arr = np.asarray(model.cpts[v], dtype=float).reshape(len(keys), -1)
                entry["spec"] = {"cpt": [{"given": [_plain(k) for k in key], "probs": [float(p) for p in row]}
                                         for key, row in zip(keys, arr)]}
            else:
                exo = model.exogenous[v]
                f = model.functions[v].reshape(len(keys), -1)
                dom = model.domains[v]
                entry["spec"] = {"structural": {
                    "exogenous": {"domain": [_plain(x) for x in exo.domain], "probs": [float(p) for p in exo.probs]},
                    "table": [{"given": [_plain(k) for k in key], "values": [_plain(dom[i]) for i in row]}
                              for key, row in zip(keys, f)]}}
        nodes.append(entry)
    out: dict[str, Any] = {"format_version": FORMAT_VERSION, "nodes": nodes}
    loss = model.loss
    if loss.kind == "table":
        out["loss"] = {"kind": "table", "table": [{"y": _plain(y), "yhat": _plain(yh), "utility": float(u)}
                                                  for (y, yh), u in sorted(loss.table.items(), key=repr)]}
    else:
        out["loss"] = {"kind": loss.kind}
    if model.groups is not None:
        out["groups"] = {"a0": _plain(model.groups.a0), "a1": _plain(model.groups.a1)}
    return out


def dumps_model(model: StructuralModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_model(model: StructuralModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")
