"""JSON Lines interchange for graphs, arborescences, and relation sequences.

One record per line, UTF-8.  Every record carries a ``format_version``
string of the form "major.minor"; readers reject unknown major versions.

Graph record::

    {"format_version": "1.0", "sentence_id": str,
     "tokens": [{"form": str, "pos": str}, ...],
     "semantics_nodes": [{"id": str, "kind": "predicate"|"argument",
                          "attributes": {name: {"value": float, "confidence": float}},
                          "label": str (optional),
                          "performative": bool (optional, default false)}, ...],
     "semantics_edges": [{"head": str, "dep": str, "kind": "argument",
                          "attributes": {...}}, ...],
     "instance_edges": [{"node": str, "token": int, "head": bool}, ...],
     "predicted": bool (optional, default false),
     "split": "train"|"dev"|"test" (optional)}

Arborescence record::

    {"format_version": "1.0", "sentence_id": str, "tokens": [...], "root": 0,
     "nodes": [{"index": int, "label": str, "kind": str, "token": int|null,
                "attributes": {...}}, ...],
     "edges": [{"head": int, "dep": int, "relation": str, "attributes": {...}}, ...],
     "copy_of": {dep index (str): antecedent index (int)}}

Relation-sequence record::

    {"format_version": "1.0", "sentence_id": str, "tokens": [...],
     "relations": [{"u": str, "d_u": int, "r": str, "v": str, "d_v": int,
                    "target_copy": int|null, "anchor": int|null,
                    "node_attributes": {...}, "edge_attributes": {...}}, ...]}
"""

import json

from .graph import (
    AttributeRecord,
    InstanceEdge,
    SemanticsEdge,
    SemanticsNode,
    Token,
    UDSGraph,
)

FORMAT_VERSION = "1.0"
_MAJOR = FORMAT_VERSION.split(".")[0]


class FormatError(Exception):
    """Malformed or version-incompatible interchange data."""


def check_version(record, where=""):
    version = record.get("format_version")
    if version is None:
        raise FormatError(f"{where}missing format_version")
    major = str(version).split(".")[0]
    if major != _MAJOR:
        raise FormatError(f"{where}unsupported format_version {version!r}")


def _attrs_to_json(attributes):
    return {
        name: {"value": rec.value, "confidence": rec.confidence}
        for name, rec in attributes.items()
    }


def _attrs_from_json(obj):
    return {
        name: AttributeRecord(value=float(rec["value"]), confidence=float(rec["confidence"]))
        for name, rec in obj.items()
    }


def graph_to_dict(graph, split=None):
    record = {
        "format_version": FORMAT_VERSION,
        "sentence_id": graph.sentence_id,
        "tokens": [{"form": t.form, "pos": t.pos} for t in graph.tokens],
        "semantics_nodes": [
            _node_to_json(n) for n in graph.semantics_nodes
        ],
        "semantics_edges": [
            {
                "head": e.head,
                "dep": e.dep,
                "kind": e.kind,
                "attributes": _attrs_to_json(e.attributes),
            }
            for e in graph.semantics_edges
        ],
        "instance_edges": [
            {"node": e.node_id, "token": e.token_index, "head": e.is_head}
            for e in graph.instance_edges
        ],
    }
    if graph.predicted:
        record["predicted"] = True
    if split is not None:
        record["split"] = split
    return record


def _node_to_json(node):
    obj = {
        "id": node.node_id,
        "kind": node.kind,
        "attributes": _attrs_to_json(node.attributes),
    }
    if node.label is not None:
        obj["label"] = node.label
    if node.performative:
        obj["performative"] = True
    return obj


def graph_from_dict(record, where=""):
    check_version(record, where)
    try:
        tokens = tuple(Token(form=t["form"], pos=t.get("pos", "")) for t in record["tokens"])
        nodes = tuple(
            SemanticsNode(
                node_id=n["id"],
                kind=n["kind"],
                attributes=_attrs_from_json(n.get("attributes", {})),
                label=n.get("label"),
                performative=bool(n.get("performative", False)),
            )
            for n in record["semantics_nodes"]
        )
        edges = tuple(
            SemanticsEdge(
                head=e["head"],
                dep=e["dep"],
                kind=e.get("kind", "argument"),
                attributes=_attrs_from_json(e.get("attributes", {})),
            )
            for e in record["semantics_edges"]
        )
        instance = tuple(
            InstanceEdge(
                node_id=e["node"],
                token_index=int(e["token"]),
                is_head=bool(e.get("head", False)),
            )
            for e in record["instance_edges"]
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{where}bad graph record: {exc}") from exc
    return UDSGraph(
        sentence_id=record["sentence_id"],
        tokens=tokens,
        semantics_nodes=nodes,
        semantics_edges=edges,
        instance_edges=instance,
        predicted=bool(record.get("predicted", False)),
    ), record.get("split")


def write_graphs(path, graphs, splits=None):
    """Write graphs as JSON Lines; ``splits`` is an optional parallel list."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, graph in enumerate(graphs):
            split = splits[i] if splits is not None else None
            fh.write(json.dumps(graph_to_dict(graph, split=split)) + "\n")


def read_graphs(path):
    """Read JSON Lines graphs; returns a list of (graph, split-or-None)."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            out.append(graph_from_dict(record, where=f"{path}:{lineno}: "))
    return out


def arborescence_to_dict(arbor):
    return {
        "format_version": FORMAT_VERSION,
        "sentence_id": arbor.sentence_id,
        "tokens": [{"form": t.form, "pos": t.pos} for t in arbor.tokens],
        "root": arbor.root_index,
        "nodes": [
            {
                "index": i,
                "label": n.label,
                "kind": n.kind,
                "token": n.token_index,
                "attributes": _attrs_to_json(n.attributes),
            }
            for i, n in enumerate(arbor.nodes)
        ],
        "edges": [
            {
                "head": e.head,
                "dep": e.dep,
                "relation": e.relation,
                "attributes": _attrs_to_json(e.attributes),
            }
            for e in arbor.edges
        ],
        "copy_of": {str(k): v for k, v in sorted(arbor.copy_of.items())},
    }


def arborescence_from_dict(record, where=""):
    from .arborescence import Arborescence, ArborEdge, ArborNode

    check_version(record, where)
    nodes = [None] * len(record["nodes"])
    for n in record["nodes"]:
        nodes[int(n["index"])] = ArborNode(
            label=n["label"],
            kind=n["kind"],
            token_index=n.get("token"),
            attributes=_attrs_from_json(n.get("attributes", {})),
        )
    edges = tuple(
        ArborEdge(
            head=int(e["head"]),
            dep=int(e["dep"]),
            relation=e["relation"],
            attributes=_attrs_from_json(e.get("attributes", {})),
        )
        for e in record["edges"]
    )
    return Arborescence(
        sentence_id=record["sentence_id"],
        tokens=tuple(Token(form=t["form"], pos=t.get("pos", "")) for t in record["tokens"]),
        nodes=tuple(nodes),
        edges=edges,
        root_index=int(record.get("root", 0)),
        copy_of={int(k): int(v) for k, v in record.get("copy_of", {}).items()},
    )


def relations_to_dict(arbor, relations):
    return {
        "format_version": FORMAT_VERSION,
        "sentence_id": arbor.sentence_id,
        "tokens": [{"form": t.form, "pos": t.pos} for t in arbor.tokens],
        "relations": [
            {
                "u": r.u,
                "d_u": r.d_u,
                "r": r.r,
                "v": r.v,
                "d_v": r.d_v,
                "target_copy": r.target_copy,
                "anchor": r.anchor,
                "node_attributes": _attrs_to_json(r.node_attributes),
                "edge_attributes": _attrs_to_json(r.edge_attributes),
            }
            for r in relations
        ],
    }


def relations_from_dict(record, where=""):
    from .arborescence import SemanticRelation

    check_version(record, where)
    tokens = tuple(Token(form=t["form"], pos=t.get("pos", "")) for t in record["tokens"])
    relations = [
        SemanticRelation(
            u=r["u"],
            d_u=int(r["d_u"]),
            r=r["r"],
            v=r["v"],
            d_v=int(r["d_v"]),
            target_copy=r.get("target_copy"),
            anchor=r.get("anchor"),
            node_attributes=_attrs_from_json(r.get("node_attributes", {})),
            edge_attributes=_attrs_from_json(r.get("edge_attributes", {})),
        )
        for r in record["relations"]
    ]
    return record["sentence_id"], tokens, relations


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_jsonl(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
    return records
