"""Attributed two-level semantic graph data model and validation.

A graph couples an ordered token sequence (the syntactic level, one node
per token) with semantics nodes (predicates and arguments).  Instance
edges tie each semantics node to the tokens it spans, with exactly one
designated head token.  Semantics edges connect semantics nodes and carry
the edge-level attributes; node-level attributes sit on the nodes.  All
attribute values live on [-3, 3] with annotator confidences on [0, 1];
an absent annotation and a zero-confidence annotation mean the same thing.

Everything here is treated as an immutable value after construction.
"""

from dataclasses import dataclass, field, replace

from .inventory import DEFAULT_INVENTORY, VALUE_MAX, VALUE_MIN

PREDICATE = "predicate"
ARGUMENT = "argument"
NODE_KINDS = (PREDICATE, ARGUMENT)

EDGE_KIND_ARGUMENT = "argument"

# Label assigned to an argument node that dominates an embedded predicate
# (clausal embedding); such nodes have no lexical label of their own.
SOMETHING_LABEL = "SOMETHING"


class MissingHeadError(Exception):
    """A semantics node has no designated head instance edge."""


@dataclass(frozen=True)
class AttributeRecord:
    """Scalar annotation: value on [-3, 3], confidence on [0, 1]."""

    value: float
    confidence: float = 1.0


@dataclass(frozen=True)
class Token:
    form: str
    pos: str = ""


@dataclass(frozen=True)
class SemanticsNode:
    node_id: str
    kind: str  # predicate | argument
    attributes: dict = field(default_factory=dict)  # name -> AttributeRecord
    label: str | None = None  # explicit lexical label; None = derive from head token
    performative: bool = False


@dataclass(frozen=True)
class SemanticsEdge:
    head: str
    dep: str
    kind: str = EDGE_KIND_ARGUMENT
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InstanceEdge:
    node_id: str
    token_index: int
    is_head: bool = False


@dataclass(frozen=True)
class UDSGraph:
    sentence_id: str
    tokens: tuple = ()
    semantics_nodes: tuple = ()
    semantics_edges: tuple = ()
    instance_edges: tuple = ()
    # Predicted graphs may contain nodes generated from the label vocabulary
    # with no token anchor, so the instance-edge requirement is waived.
    predicted: bool = False

    def node(self, node_id):
        for n in self.semantics_nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def node_ids(self):
        return [n.node_id for n in self.semantics_nodes]


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple = ()  # (code, location, message)

    @property
    def is_valid(self):
        return not self.errors


def head_token_index(graph, node_id):
    """Designated head token of a semantics node, or None if unset."""
    for e in graph.instance_edges:
        if e.node_id == node_id and e.is_head:
            return e.token_index
    return None


def node_yield(graph, node_id):
    """Token indices spanned by a semantics node, in text order."""
    return sorted(e.token_index for e in graph.instance_edges if e.node_id == node_id)


def dominates_predicate(graph, node_id):
    """True when the node heads a semantics edge whose dependent is a predicate."""
    kinds = {n.node_id: n.kind for n in graph.semantics_nodes}
    return any(
        e.head == node_id and kinds.get(e.dep) == PREDICATE for e in graph.semantics_edges
    )


def node_label(graph, node):
    """Lexical label of a semantics node.

    Precedence: an explicit label if present; the SOMETHING placeholder for
    an argument node that dominates an embedded predicate; otherwise the
    surface form of the designated head token.
    """
    if isinstance(node, str):
        node = graph.node(node)
    if node.label is not None:
        return node.label
    if node.kind == ARGUMENT and dominates_predicate(graph, node.node_id):
        return SOMETHING_LABEL
    head = head_token_index(graph, node.node_id)
    if head is None:
        raise MissingHeadError(f"node {node.node_id} has no designated head instance edge")
    return graph.tokens[head].form


def validate_graph(graph, inventory=DEFAULT_INVENTORY):
    """Check every structural invariant; violations are data, not failures."""
    errors = []

    def err(code, location, message):
        errors.append((code, location, message))

    node_ids = set()
    for node in graph.semantics_nodes:
        if node.node_id in node_ids:
            err("DUP_NODE_ID", node.node_id, "duplicate semantics node id")
        node_ids.add(node.node_id)
        if node.kind not in NODE_KINDS:
            err("BAD_KIND", node.node_id, f"unknown node kind {node.kind!r}")
        for name, record in node.attributes.items():
            if inventory.is_edge_property(name):
                err("MISPLACED_ATTR", node.node_id, f"edge attribute {name!r} on a node")
            elif not inventory.is_node_property(name):
                err("UNKNOWN_ATTR", node.node_id, f"unknown attribute {name!r}")
            _check_record(name, node.node_id, record, err)

    for edge in graph.semantics_edges:
        loc = f"{edge.head}->{edge.dep}"
        if edge.head not in node_ids or edge.dep not in node_ids:
            err("DANGLING_EDGE", loc, "semantics edge endpoint is not a semantics node")
        if edge.head == edge.dep:
            err("SELF_LOOP", loc, "semantics edge forms a self-loop")
        if edge.kind != EDGE_KIND_ARGUMENT:
            err("BAD_EDGE_KIND", loc, f"unknown edge kind {edge.kind!r}")
        for name, record in edge.attributes.items():
            if inventory.is_node_property(name):
                err("MISPLACED_ATTR", loc, f"node attribute {name!r} on an edge")
            elif not inventory.is_edge_property(name):
                err("UNKNOWN_ATTR", loc, f"unknown attribute {name!r}")
            _check_record(name, loc, record, err)

    seen_edges = set()
    for edge in graph.semantics_edges:
        key = (edge.head, edge.dep)
        if key in seen_edges:
            err("DUP_EDGE", f"{edge.head}->{edge.dep}", "duplicate semantics edge")
        seen_edges.add(key)

    spans = {}
    heads = {}
    for e in graph.instance_edges:
        if e.node_id not in node_ids:
            err("DANGLING_EDGE", e.node_id, "instance edge from unknown semantics node")
            continue
        if not 0 <= e.token_index < len(graph.tokens):
            err("BAD_TOKEN_INDEX", e.node_id, f"token index {e.token_index} out of range")
        span = spans.setdefault(e.node_id, set())
        if e.token_index in span:
            err("DUP_TOKEN", e.node_id, f"token {e.token_index} spanned twice")
        span.add(e.token_index)
        if e.is_head:
            heads[e.node_id] = heads.get(e.node_id, 0) + 1

    for node_id in node_ids:
        span = spans.get(node_id)
        if not span:
            if not graph.predicted:
                err("NO_INSTANCE", node_id, "semantics node has no instance edge")
            continue
        n_heads = heads.get(node_id, 0)
        if n_heads == 0:
            err("NO_HEAD", node_id, "no instance edge designated as head")
        elif n_heads > 1:
            err("MULTI_HEAD", node_id, f"{n_heads} instance edges designated as head")

    return ValidationReport(errors=tuple(errors))


def _check_record(name, location, record, err):
    if not VALUE_MIN <= record.value <= VALUE_MAX:
        err("VALUE_RANGE", location, f"{name}={record.value} outside [-3, 3]")
    if not 0.0 <= record.confidence <= 1.0:
        err("CONF_RANGE", location, f"{name} confidence {record.confidence} outside [0, 1]")


def strip_performative_nodes(graph):
    """Remove speaker/author/addressee placeholder nodes and incident edges."""
    dropped = {n.node_id for n in graph.semantics_nodes if n.performative}
    if not dropped:
        return graph
    return replace(
        graph,
        semantics_nodes=tuple(n for n in graph.semantics_nodes if n.node_id not in dropped),
        semantics_edges=tuple(
            e for e in graph.semantics_edges if e.head not in dropped and e.dep not in dropped
        ),
        instance_edges=tuple(e for e in graph.instance_edges if e.node_id not in dropped),
    )


def semantic_subgraph(graph):
    """Drop the syntactic level, copying lexical labels onto semantics nodes.

    The semantics edge set is preserved exactly; tokens and instance edges
    are removed.  Raises MissingHeadError when a node has neither an
    explicit label nor a designated head token.
    """
    labeled = tuple(
        replace(n, label=node_label(graph, n)) for n in graph.semantics_nodes
    )
    return replace(graph, tokens=(), semantics_nodes=labeled, instance_edges=())
