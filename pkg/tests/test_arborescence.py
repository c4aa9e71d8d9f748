from dataclasses import replace

import pytest

from udsparse.arborescence import (
    CycleError,
    DanglingHeadError,
    KIND_SYNTAX,
    SEMANTIC_KINDS,
    SemanticRelation,
    build_arborescence,
    canonicalize,
    delinearize,
    linearize,
    to_graph,
)
from udsparse.graph import (
    AttributeRecord,
    InstanceEdge,
    SemanticsEdge,
    SemanticsNode,
    Token,
    UDSGraph,
)
from udsparse.synthetic import SyntheticGrammarConfig, generate_synthetic

def simple_graph():
    tokens = (Token("Alice", "NNP"), Token("waved", "VBD"))
    nodes = (
        SemanticsNode("semantics-pred-1", "predicate"),
        SemanticsNode("semantics-arg-0", "argument"),
    )
    edges = (SemanticsEdge("semantics-pred-1", "semantics-arg-0"),)
    instance = (
        InstanceEdge("semantics-pred-1", 1, is_head=True),
        InstanceEdge("semantics-arg-0", 0, is_head=True),
    )
    return UDSGraph("simple", tokens, nodes, edges, instance)

class TestBuildArborescence:
    def test_object_control_matches_golden(
        self, object_control_graph, object_control_arborescence
    ):
        assert build_arborescence(object_control_graph) == object_control_arborescence

    def test_duplicate_and_placeholder(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        assert arbor.copy_of == {6: 2}
        assert arbor.nodes[6].label == "Bush"
        assert arbor.nodes[6].attributes == {}
        assert arbor.nodes[4].label == "SOMETHING"

    def test_simple_three_node_tree(self):
        arbor = build_arborescence(simple_graph())
        assert len(arbor.nodes) == 3
        assert [e.relation for e in arbor.edges] == ["root", "argument"]
        assert not [n for n in arbor.nodes if n.kind == KIND_SYNTAX]

    def test_three_token_yield(self):
        tokens = (Token("the", "DT"), Token("old", "JJ"), Token("wizard", "NN"),
                  Token("waved", "VBD"))
        nodes = (
            SemanticsNode("semantics-pred-3", "predicate"),
            SemanticsNode("semantics-arg-2", "argument"),
        )
        edges = (SemanticsEdge("semantics-pred-3", "semantics-arg-2"),)
        instance = (
            InstanceEdge("semantics-pred-3", 3, is_head=True),
            InstanceEdge("semantics-arg-2", 2, is_head=True),
            InstanceEdge("semantics-arg-2", 0),
            InstanceEdge("semantics-arg-2", 1),
        )
        arbor = build_arborescence(UDSGraph("span", tokens, nodes, edges, instance))
        nonhead = [e for e in arbor.edges if e.relation == "non-head"]
        assert len(nonhead) == 2
        # text order
        syn_labels = [arbor.nodes[e.dep].label for e in nonhead]
        assert syn_labels == ["the", "old"]

    def test_node_count_invariant(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        g = object_control_graph
        n_sem = len(g.semantics_nodes)
        n_dup = len(arbor.copy_of)
        n_syntax = len([n for n in arbor.nodes if n.kind == KIND_SYNTAX])
        assert len(arbor.nodes) == n_sem + n_dup + n_syntax + 1

    def test_rejects_performatives(self):
        g = simple_graph()
        g = replace(
            g,
            semantics_nodes=g.semantics_nodes
            + (SemanticsNode("semantics-arg-author", "argument", performative=True),),
            instance_edges=g.instance_edges
            + (InstanceEdge("semantics-arg-author", 0, is_head=True),),
        )
        with pytest.raises(ValueError):
            build_arborescence(g)

    def test_cycle_detected(self):
        tokens = (Token("a", "NN"), Token("b", "NN"))
        nodes = (
            SemanticsNode("semantics-arg-0", "argument"),
            SemanticsNode("semantics-pred-1", "predicate"),
        )
        edges = (
            SemanticsEdge("semantics-arg-0", "semantics-pred-1"),
            SemanticsEdge("semantics-pred-1", "semantics-arg-0"),
        )
        instance = (
            InstanceEdge("semantics-arg-0", 0, is_head=True),
            InstanceEdge("semantics-pred-1", 1, is_head=True),
        )
        with pytest.raises(CycleError):
            build_arborescence(UDSGraph("cycle", tokens, nodes, edges, instance))

    def test_preorder_heads_precede_dependents(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        for edge in arbor.edges:
            assert edge.head < edge.dep
        for dup, antecedent in arbor.copy_of.items():
            assert antecedent < dup

class TestLinearize:
    def test_length_and_once(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        rels = linearize(arbor)
        assert len(rels) == len(arbor.nodes) - 1
        assert [r.d_v for r in rels] == list(range(1, len(arbor.nodes)))

    def test_antecedent_precedes_copy(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        rels = linearize(arbor)
        copies = [r for r in rels if r.target_copy is not None]
        assert copies and all(r.target_copy < r.d_v for r in copies)

    def test_simple_tree_two_relations(self):
        arbor = build_arborescence(simple_graph())
        rels = linearize(arbor)
        assert len(rels) == 2
        assert rels[0].r == "root"
        assert rels[1].r == "argument"

class TestDelinearize:
    def test_empty_sequence(self):
        arbor = delinearize([])
        assert len(arbor.nodes) == 1
        assert arbor.edges == ()

    def test_golden_round_trip(self, object_control_arborescence):
        arbor = object_control_arborescence
        rebuilt = delinearize(
            linearize(arbor), sentence_id=arbor.sentence_id, tokens=arbor.tokens
        )
        assert rebuilt == arbor

    def test_self_reference_rejected(self):
        rel = SemanticRelation(u="x", d_u=1, r="root", v="x", d_v=1)
        with pytest.raises(DanglingHeadError):
            delinearize([rel])

    def test_forward_reference_rejected(self):
        rel = SemanticRelation(u="x", d_u=5, r="root", v="x", d_v=1)
        with pytest.raises(DanglingHeadError):
            delinearize([rel])

class TestToGraph:
    def test_object_control_round_trip(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        back = to_graph(arbor)
        assert canonicalize(back) == canonicalize(object_control_graph)

    def test_duplicate_merges_to_reentrancy(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        back = to_graph(arbor)
        incoming = [e for e in back.semantics_edges if e.dep == "semantics-arg-0"]
        assert len(incoming) == 2

    def test_attributes_bit_exact(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        back = canonicalize(to_graph(arbor))
        orig = canonicalize(object_control_graph)
        for got, want in zip(back.semantics_nodes, orig.semantics_nodes):
            assert got.attributes == want.attributes
        for got, want in zip(back.semantics_edges, orig.semantics_edges):
            assert got.attributes == want.attributes

class TestSyntheticRoundTrips:
    """Round-trip oracles over the generator (the full 500-graph sweep lives
    in the acceptance suite; this is a quick sample)."""

    def test_sample_round_trips(self):
        corpus = generate_synthetic(SyntheticGrammarConfig(sentence_count=40, seed=7))
        for graph in corpus.graphs:
            arbor = build_arborescence(graph)
            rels = linearize(arbor)
            rebuilt = delinearize(rels, sentence_id=arbor.sentence_id, tokens=arbor.tokens)
            assert rebuilt == arbor
            assert canonicalize(to_graph(arbor)) == canonicalize(graph)

    def test_control_sentences_have_duplicates(self):
        cfg = SyntheticGrammarConfig(
            sentence_count=10, seed=3, construction_mix=(0.0, 0.0, 0.0, 1.0)
        )
        corpus = generate_synthetic(cfg)
        for graph in corpus.graphs:
            arbor = build_arborescence(graph)
            assert len(arbor.copy_of) == 1

    def test_semantic_indices(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        sem = arbor.semantic_indices()
        assert all(arbor.nodes[i].kind in SEMANTIC_KINDS for i in sem)
        assert len(sem) == 6  # 5 originals + 1 duplicate

    def test_attribute_payload_survives(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        rels = linearize(arbor)
        nominated = rels[0]
        assert nominated.v == "nominated"
        assert nominated.node_attributes["factuality-factual"] == AttributeRecord(2.25, 1.0)
        bush_edge = rels[1]
        assert bush_edge.edge_attributes["volition"] == AttributeRecord(2.1, 1.0)
