from dataclasses import replace

import pytest

from udsparse.graph import (
    AttributeRecord,
    InstanceEdge,
    MissingHeadError,
    SemanticsEdge,
    SemanticsNode,
    Token,
    UDSGraph,
    node_label,
    semantic_subgraph,
    strip_performative_nodes,
    validate_graph,
)
from udsparse.inventory import (
    ARGUMENT_PROPERTIES,
    DEFAULT_INVENTORY,
    EDGE_PROPERTIES,
    NODE_PROPERTIES,
    PREDICATE_PROPERTIES,
)


def two_predicate_graph():
    """Well-formed graph: 'Alice left. praised' style two-clause toy."""
    tokens = (Token("Alice", "NNP"), Token("left", "VBD"),
              Token("Bob", "NNP"), Token("waved", "VBD"))
    nodes = (
        SemanticsNode("semantics-pred-1", "predicate",
                      {"factuality-factual": AttributeRecord(2.0, 1.0)}),
        SemanticsNode("semantics-arg-0", "argument",
                      {"supersense-noun.person": AttributeRecord(2.5, 0.9)}),
        SemanticsNode("semantics-pred-3", "predicate"),
        SemanticsNode("semantics-arg-2", "argument"),
    )
    edges = (
        SemanticsEdge("semantics-pred-1", "semantics-arg-0",
                      attributes={"volition": AttributeRecord(1.0, 0.8)}),
        SemanticsEdge("semantics-pred-3", "semantics-arg-2"),
    )
    instance = (
        InstanceEdge("semantics-pred-1", 1, is_head=True),
        InstanceEdge("semantics-arg-0", 0, is_head=True),
        InstanceEdge("semantics-pred-3", 3, is_head=True),
        InstanceEdge("semantics-arg-2", 2, is_head=True),
    )
    return UDSGraph("two-preds", tokens, nodes, edges, instance)


class TestInventory:
    def test_sizes(self):
        assert len(NODE_PROPERTIES) == 44
        assert len(EDGE_PROPERTIES) == 14

    def test_group_counts(self):
        genericity = [p for p in NODE_PROPERTIES if p.startswith("genericity")]
        durations = [p for p in NODE_PROPERTIES if p.startswith("time-dur")]
        supersenses = [p for p in NODE_PROPERTIES if p.startswith("supersense")]
        assert len(genericity) == 6
        assert len(durations) == 11
        assert len(supersenses) == 26
        assert "factuality-factual" in NODE_PROPERTIES

    def test_kind_partition(self):
        assert set(PREDICATE_PROPERTIES) | set(ARGUMENT_PROPERTIES) == set(NODE_PROPERTIES)
        assert not set(PREDICATE_PROPERTIES) & set(ARGUMENT_PROPERTIES)

    def test_indexing(self):
        assert DEFAULT_INVENTORY.node_index("factuality-factual") == 0
        assert DEFAULT_INVENTORY.is_edge_property("volition")
        assert not DEFAULT_INVENTORY.is_node_property("volition")


class TestValidateGraph:
    def test_well_formed(self):
        assert validate_graph(two_predicate_graph()).is_valid

    def test_pure(self):
        g = two_predicate_graph()
        assert validate_graph(g) == validate_graph(g)

    def test_value_range(self):
        g = two_predicate_graph()
        bad = replace(
            g.semantics_nodes[0],
            attributes={"factuality-factual": AttributeRecord(4.0, 1.0)},
        )
        g = replace(g, semantics_nodes=(bad,) + g.semantics_nodes[1:])
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert codes == {"VALUE_RANGE"}

    def test_misplaced_attribute(self):
        g = two_predicate_graph()
        bad = replace(
            g.semantics_nodes[0],
            attributes={"volition": AttributeRecord(1.0, 1.0)},
        )
        g = replace(g, semantics_nodes=(bad,) + g.semantics_nodes[1:])
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert codes == {"MISPLACED_ATTR"}

    def test_node_attr_on_edge(self):
        g = two_predicate_graph()
        bad = replace(
            g.semantics_edges[0],
            attributes={"factuality-factual": AttributeRecord(1.0, 1.0)},
        )
        g = replace(g, semantics_edges=(bad,) + g.semantics_edges[1:])
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert codes == {"MISPLACED_ATTR"}

    def test_missing_instance_edge(self):
        g = two_predicate_graph()
        g = replace(g, instance_edges=g.instance_edges[1:])
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert "NO_INSTANCE" in codes

    def test_predicted_graph_may_be_unanchored(self):
        g = two_predicate_graph()
        g = replace(g, instance_edges=g.instance_edges[1:], predicted=True)
        assert validate_graph(g).is_valid

    def test_self_loop_and_dangling(self):
        g = two_predicate_graph()
        g = replace(
            g,
            semantics_edges=g.semantics_edges + (
                SemanticsEdge("semantics-pred-1", "semantics-pred-1"),
                SemanticsEdge("semantics-pred-1", "nowhere"),
            ),
        )
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert "SELF_LOOP" in codes
        assert "DANGLING_EDGE" in codes

    def test_multi_head(self):
        g = two_predicate_graph()
        g = replace(
            g,
            instance_edges=g.instance_edges + (InstanceEdge("semantics-arg-0", 2, is_head=True),),
        )
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert "MULTI_HEAD" in codes

    def test_confidence_range(self):
        g = two_predicate_graph()
        bad = replace(
            g.semantics_nodes[0],
            attributes={"factuality-factual": AttributeRecord(1.0, 1.5)},
        )
        g = replace(g, semantics_nodes=(bad,) + g.semantics_nodes[1:])
        codes = {c for c, _, _ in validate_graph(g).errors}
        assert codes == {"CONF_RANGE"}


class TestStripPerformatives:
    def performative_graph(self):
        g = two_predicate_graph()
        author = SemanticsNode("semantics-arg-author", "argument", performative=True)
        addressee = SemanticsNode("semantics-arg-addressee", "argument", performative=True)
        return replace(
            g,
            semantics_nodes=g.semantics_nodes + (author, addressee),
            semantics_edges=g.semantics_edges + (
                SemanticsEdge("semantics-arg-author", "semantics-pred-1"),
                SemanticsEdge("semantics-arg-addressee", "semantics-pred-1"),
            ),
        )

    def test_no_performatives_is_identity(self):
        g = two_predicate_graph()
        assert strip_performative_nodes(g) is g

    def test_removes_flagged_nodes_and_edges(self):
        g = self.performative_graph()
        stripped = strip_performative_nodes(g)
        assert len(stripped.semantics_nodes) == 4
        assert len(stripped.semantics_edges) == 2
        assert all(not n.performative for n in stripped.semantics_nodes)

    def test_idempotent(self):
        g = self.performative_graph()
        once = strip_performative_nodes(g)
        assert strip_performative_nodes(once) == once


class TestSemanticSubgraph:
    def test_object_control_fixture(self, object_control_graph):
        sub = semantic_subgraph(object_control_graph)
        assert len(sub.semantics_nodes) == 5
        assert sub.tokens == ()
        assert sub.instance_edges == ()

    def test_labels_copied(self, object_control_graph):
        sub = semantic_subgraph(object_control_graph)
        labels = {n.node_id: n.label for n in sub.semantics_nodes}
        assert labels["semantics-pred-1"] == "nominated"
        assert labels["semantics-arg-0"] == "Bush"
        assert labels["semantics-arg-4"] == "SOMETHING"

    def test_edge_set_preserved(self, object_control_graph):
        sub = semantic_subgraph(object_control_graph)
        assert sub.semantics_edges == object_control_graph.semantics_edges

    def test_node_count_conserved(self, object_control_graph):
        sub = semantic_subgraph(object_control_graph)
        assert len(sub.semantics_nodes) == len(object_control_graph.semantics_nodes)

    def test_empty_graph(self):
        g = UDSGraph("empty", tokens=(Token("hm", "UH"),))
        sub = semantic_subgraph(g)
        assert sub.semantics_nodes == ()

    def test_missing_head_raises(self):
        g = two_predicate_graph()
        g = replace(
            g,
            instance_edges=tuple(
                replace(e, is_head=False) if e.node_id == "semantics-arg-0" else e
                for e in g.instance_edges
            ),
        )
        with pytest.raises(MissingHeadError):
            semantic_subgraph(g)


class TestNodeLabel:
    def test_head_form(self):
        g = two_predicate_graph()
        assert node_label(g, "semantics-arg-0") == "Alice"

    def test_explicit_label_wins(self):
        g = two_predicate_graph()
        nodes = tuple(
            replace(n, label="custom") if n.node_id == "semantics-arg-0" else n
            for n in g.semantics_nodes
        )
        g = replace(g, semantics_nodes=nodes)
        assert node_label(g, "semantics-arg-0") == "custom"

    def test_something_rule(self, object_control_graph):
        assert node_label(object_control_graph, "semantics-arg-4") == "SOMETHING"
