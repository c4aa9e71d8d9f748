"""Conversion between attributed graphs and trainable arborescences.

An arborescence is the single-rooted tree form of a semantic graph:

  (a) every semantics node is labeled with the surface form of its head
      token, except embedded-clause arguments, which get the SOMETHING
      placeholder;
  (b) semantics edges become "argument" edges, and re-entrant nodes are
      duplicated, with ``copy_of`` recording the antecedent;
  (c) the remaining yield of each semantics node is flattened into
      "non-head" edges to syntax leaf nodes, in text order.

A synthetic root node (index 0) heads every top-level semantics node via
a "root" edge.  Node indices follow the linearization order: semantic
children first (ordered by head-token position, ties by node id), then
syntax children in text order, depth first.  Because of this, the edge
list is exactly parallel to nodes 1..n and ``linearize``/``delinearize``
are trivial inverses.

Duplicated nodes are leaves: they carry the antecedent's label, kind, and
token anchor but no attributes and no children, and a chain of duplicates
always points back at the original node.
"""

from dataclasses import dataclass, field

from .graph import (
    ARGUMENT,
    InstanceEdge,
    MissingHeadError,
    PREDICATE,
    SemanticsEdge,
    SemanticsNode,
    UDSGraph,
    head_token_index,
    node_label,
    node_yield,
)

ROOT_LABEL = "@root@"

KIND_PREDICATE = "semantic-predicate"
KIND_ARGUMENT = "semantic-argument"
KIND_SYNTAX = "syntax"
KIND_ROOT = "root"
SEMANTIC_KINDS = (KIND_PREDICATE, KIND_ARGUMENT)

RELATION_ROOT = "root"
RELATION_ARGUMENT = "argument"
RELATION_NONHEAD = "non-head"
RELATIONS = (RELATION_ROOT, RELATION_ARGUMENT, RELATION_NONHEAD)

_GRAPH_KIND = {PREDICATE: KIND_PREDICATE, ARGUMENT: KIND_ARGUMENT}
_ARBOR_KIND = {KIND_PREDICATE: PREDICATE, KIND_ARGUMENT: ARGUMENT}


class CycleError(Exception):
    """Semantics edges contain a directed cycle unreachable from any root."""


class DanglingHeadError(Exception):
    """A relation references an index that has not been generated yet."""


@dataclass(frozen=True)
class ArborNode:
    label: str
    kind: str
    token_index: int | None = None  # head token for semantic nodes, own token for syntax
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ArborEdge:
    head: int
    dep: int
    relation: str
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Arborescence:
    sentence_id: str
    tokens: tuple = ()
    nodes: tuple = ()  # nodes[0] is the synthetic root
    edges: tuple = ()  # edges[i-1] attaches node i to its head
    root_index: int = 0
    copy_of: dict = field(default_factory=dict)  # duplicate index -> antecedent index

    def semantic_indices(self):
        return [i for i, n in enumerate(self.nodes) if n.kind in SEMANTIC_KINDS]


@dataclass(frozen=True)
class SemanticRelation:
    """One step of the linearized tree: node ``v`` attaches to ``u`` via ``r``.

    ``d_u``/``d_v`` are arborescence indices.  ``target_copy`` marks ``v``
    as a duplicate of an earlier node.  ``anchor`` is the source-token
    index backing ``v`` (None for generated labels such as SOMETHING), and
    the attribute maps carry the annotations of ``v`` and of the edge
    ``u -> v``; they ride along for training targets and exact inversion
    and are not consumed by the embedding pipeline.
    """

    u: str
    d_u: int
    r: str
    v: str
    d_v: int
    target_copy: int | None = None
    anchor: int | None = None
    node_attributes: dict = field(default_factory=dict)
    edge_attributes: dict = field(default_factory=dict)


def build_arborescence(graph):
    """Convert a (stripped, valid) graph into its arborescence.

    Raises MissingHeadError when a semantics node has no designated head,
    CycleError when semantics edges form a cycle unreachable from the root
    forest, and ValueError if performative nodes are still present.
    """
    if any(n.performative for n in graph.semantics_nodes):
        raise ValueError("strip performative nodes before building an arborescence")

    anchors = {}
    for node in graph.semantics_nodes:
        head = head_token_index(graph, node.node_id)
        if head is None:
            raise MissingHeadError(
                f"node {node.node_id} has no designated head instance edge"
            )
        anchors[node.node_id] = head

    labels = {n.node_id: node_label(graph, n) for n in graph.semantics_nodes}
    by_id = {n.node_id: n for n in graph.semantics_nodes}
    children = {n.node_id: [] for n in graph.semantics_nodes}
    has_parent = set()
    for edge in graph.semantics_edges:
        children[edge.head].append(edge)
        has_parent.add(edge.dep)

    top_level = sorted(
        (n.node_id for n in graph.semantics_nodes if n.node_id not in has_parent),
        key=lambda nid: (anchors[nid], nid),
    )

    nodes = [ArborNode(label=ROOT_LABEL, kind=KIND_ROOT)]
    edges = []
    copy_of = {}
    placed = {}  # graph node id -> arborescence index

    def emit(node_id, head_index, relation, edge_attrs):
        """Materialize node_id (or a duplicate of it) under head_index."""
        node = by_id[node_id]
        if node_id in placed:
            index = len(nodes)
            nodes.append(
                ArborNode(
                    label=labels[node_id],
                    kind=_GRAPH_KIND[node.kind],
                    token_index=anchors[node_id],
                )
            )
            edges.append(ArborEdge(head_index, index, relation, dict(edge_attrs)))
            copy_of[index] = placed[node_id]
            return
        index = len(nodes)
        placed[node_id] = index
        nodes.append(
            ArborNode(
                label=labels[node_id],
                kind=_GRAPH_KIND[node.kind],
                token_index=anchors[node_id],
                attributes=dict(node.attributes),
            )
        )
        edges.append(ArborEdge(head_index, index, relation, dict(edge_attrs)))
        sem_children = sorted(
            children[node_id], key=lambda e: (anchors[e.dep], e.dep)
        )
        for child_edge in sem_children:
            emit(child_edge.dep, index, RELATION_ARGUMENT, child_edge.attributes)
        for tok in node_yield(graph, node_id):
            if tok == anchors[node_id]:
                continue
            syn_index = len(nodes)
            nodes.append(
                ArborNode(
                    label=graph.tokens[tok].form, kind=KIND_SYNTAX, token_index=tok
                )
            )
            edges.append(ArborEdge(index, syn_index, RELATION_NONHEAD, {}))

    for node_id in top_level:
        emit(node_id, 0, RELATION_ROOT, {})

    unreached = [nid for nid in by_id if nid not in placed]
    if unreached:
        raise CycleError(
            "semantics edges form a cycle with no root entry: " + ", ".join(sorted(unreached))
        )

    return Arborescence(
        sentence_id=graph.sentence_id,
        tokens=graph.tokens,
        nodes=tuple(nodes),
        edges=tuple(edges),
        copy_of=copy_of,
    )


def linearize(arbor):
    """Pre-order relation sequence; the root is implicit at index 0."""
    relations = []
    for edge in arbor.edges:
        dep = arbor.nodes[edge.dep]
        relations.append(
            SemanticRelation(
                u=arbor.nodes[edge.head].label,
                d_u=edge.head,
                r=edge.relation,
                v=dep.label,
                d_v=edge.dep,
                target_copy=arbor.copy_of.get(edge.dep),
                anchor=dep.token_index,
                node_attributes=dict(dep.attributes),
                edge_attributes=dict(edge.attributes),
            )
        )
    return relations


def delinearize(relations, sentence_id="", tokens=()):
    """Rebuild an arborescence from a relation sequence.

    Node kinds are restored structurally: "non-head" dependents are syntax
    nodes, "root" dependents are predicates, and "argument" dependents
    alternate with their head's kind (an argument under a predicate, a
    predicate under an argument, as in clausal embedding).  Raises
    DanglingHeadError when ``d_u``, ``d_v``, or ``target_copy`` do not
    reference strictly earlier positions.
    """
    nodes = [ArborNode(label=ROOT_LABEL, kind=KIND_ROOT)]
    edges = []
    copy_of = {}
    for pos, rel in enumerate(relations, start=1):
        if rel.d_v != pos:
            raise DanglingHeadError(
                f"relation at position {pos} carries d_v={rel.d_v}"
            )
        if not 0 <= rel.d_u < pos:
            raise DanglingHeadError(
                f"relation at position {pos} references head index {rel.d_u}"
            )
        if rel.target_copy is not None and not 1 <= rel.target_copy < pos:
            raise DanglingHeadError(
                f"relation at position {pos} copies unseen index {rel.target_copy}"
            )
        if rel.r not in RELATIONS:
            raise ValueError(f"unknown relation {rel.r!r}")
        if rel.r == RELATION_NONHEAD:
            kind = KIND_SYNTAX
        elif rel.r == RELATION_ROOT:
            kind = KIND_PREDICATE
        else:
            head_kind = nodes[rel.d_u].kind
            kind = KIND_PREDICATE if head_kind == KIND_ARGUMENT else KIND_ARGUMENT
        nodes.append(
            ArborNode(
                label=rel.v,
                kind=kind,
                token_index=rel.anchor,
                attributes=dict(rel.node_attributes),
            )
        )
        edges.append(ArborEdge(rel.d_u, pos, rel.r, dict(rel.edge_attributes)))
        if rel.target_copy is not None:
            copy_of[pos] = rel.target_copy
    return Arborescence(
        sentence_id=sentence_id,
        tokens=tuple(tokens),
        nodes=tuple(nodes),
        edges=tuple(edges),
        copy_of=copy_of,
    )


def canonical_node_id(kind, token_index, used=None):
    """Deterministic graph node id from kind and head-token anchor."""
    prefix = "semantics-pred" if kind == KIND_PREDICATE else "semantics-arg"
    base = f"{prefix}-{token_index}" if token_index is not None else f"{prefix}-gen"
    if used is None:
        return base
    candidate = base
    suffix = 1
    while candidate in used:
        suffix += 1
        candidate = f"{base}-{suffix}"
    used.add(candidate)
    return candidate


def to_graph(arbor, predicted=False):
    """Materialize an arborescence as a graph, merging duplicates back.

    Duplicate nodes collapse into their antecedents, turning their
    incoming edges into re-entrant semantics edges.  Non-head syntax
    children become instance edges; the node's own anchor becomes the
    designated head instance edge.  Syntax children without a token anchor
    (possible only in predicted trees) are dropped.
    """
    used_ids = set()
    index_to_id = {}
    sem_nodes = []
    for i, node in enumerate(arbor.nodes):
        if node.kind not in SEMANTIC_KINDS or i in arbor.copy_of:
            continue
        node_id = canonical_node_id(node.kind, node.token_index, used_ids)
        index_to_id[i] = node_id
        explicit_label = node.label if node.token_index is None else None
        sem_nodes.append(
            SemanticsNode(
                node_id=node_id,
                kind=_ARBOR_KIND[node.kind],
                attributes=dict(node.attributes),
                label=explicit_label,
            )
        )
    for dup, antecedent in arbor.copy_of.items():
        index_to_id[dup] = index_to_id[antecedent]

    sem_edges = []
    instance = []
    for i, node in enumerate(arbor.nodes):
        if i not in index_to_id or i in arbor.copy_of:
            continue
        if node.token_index is not None:
            instance.append(
                InstanceEdge(index_to_id[i], node.token_index, is_head=True)
            )
    for edge in arbor.edges:
        dep_node = arbor.nodes[edge.dep]
        if edge.relation == RELATION_NONHEAD:
            if dep_node.token_index is None:
                continue
            instance.append(
                InstanceEdge(index_to_id[edge.head], dep_node.token_index, is_head=False)
            )
        elif edge.relation == RELATION_ARGUMENT:
            sem_edges.append(
                SemanticsEdge(
                    head=index_to_id[edge.head],
                    dep=index_to_id[edge.dep],
                    attributes=dict(edge.attributes),
                )
            )

    return UDSGraph(
        sentence_id=arbor.sentence_id,
        tokens=arbor.tokens,
        semantics_nodes=tuple(sem_nodes),
        semantics_edges=tuple(sem_edges),
        instance_edges=tuple(instance),
        predicted=predicted,
    )


def canonicalize(graph):
    """Sort nodes/edges for order-insensitive graph comparison."""
    return UDSGraph(
        sentence_id=graph.sentence_id,
        tokens=graph.tokens,
        semantics_nodes=tuple(sorted(graph.semantics_nodes, key=lambda n: n.node_id)),
        semantics_edges=tuple(
            sorted(graph.semantics_edges, key=lambda e: (e.head, e.dep))
        ),
        instance_edges=tuple(
            sorted(graph.instance_edges, key=lambda e: (e.node_id, e.token_index))
        ),
        predicted=graph.predicted,
    )
