import json

import pytest

from udsparse.arborescence import build_arborescence, linearize
from udsparse.io import (
    FormatError,
    arborescence_from_dict,
    arborescence_to_dict,
    graph_from_dict,
    graph_to_dict,
    read_graphs,
    relations_from_dict,
    relations_to_dict,
    write_graphs,
)
from udsparse.synthetic import SyntheticGrammarConfig, generate_synthetic


class TestGraphRecords:
    def test_round_trip(self, object_control_graph):
        record = graph_to_dict(object_control_graph, split="train")
        graph, split = graph_from_dict(record)
        assert graph == object_control_graph
        assert split == "train"

    def test_json_serializable(self, object_control_graph):
        text = json.dumps(graph_to_dict(object_control_graph))
        graph, _ = graph_from_dict(json.loads(text))
        assert graph == object_control_graph

    def test_missing_version_rejected(self, object_control_graph):
        record = graph_to_dict(object_control_graph)
        del record["format_version"]
        with pytest.raises(FormatError):
            graph_from_dict(record)

    def test_unknown_major_rejected(self, object_control_graph):
        record = graph_to_dict(object_control_graph)
        record["format_version"] = "7.3"
        with pytest.raises(FormatError):
            graph_from_dict(record)

    def test_minor_version_accepted(self, object_control_graph):
        record = graph_to_dict(object_control_graph)
        record["format_version"] = "1.9"
        graph, _ = graph_from_dict(record)
        assert graph == object_control_graph

    def test_file_round_trip(self, tmp_path, object_control_graph):
        path = tmp_path / "graphs.jsonl"
        write_graphs(path, [object_control_graph], splits=["test"])
        loaded = read_graphs(path)
        assert loaded == [(object_control_graph, "test")]

    def test_performative_flag_survives(self, object_control_graph):
        from dataclasses import replace

        node = replace(object_control_graph.semantics_nodes[0], performative=True)
        graph = replace(
            object_control_graph,
            semantics_nodes=(node,) + object_control_graph.semantics_nodes[1:],
        )
        back, _ = graph_from_dict(graph_to_dict(graph))
        assert back.semantics_nodes[0].performative


class TestArborescenceRecords:
    def test_round_trip(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        record = arborescence_to_dict(arbor)
        assert arborescence_from_dict(json.loads(json.dumps(record))) == arbor

    def test_relations_round_trip(self, object_control_graph):
        arbor = build_arborescence(object_control_graph)
        rels = linearize(arbor)
        record = relations_to_dict(arbor, rels)
        sentence_id, tokens, back = relations_from_dict(json.loads(json.dumps(record)))
        assert sentence_id == arbor.sentence_id
        assert tokens == arbor.tokens
        assert back == rels


class TestCorpusRecords:
    def test_synthetic_corpus_round_trip(self, tmp_path):
        corpus = generate_synthetic(SyntheticGrammarConfig(sentence_count=5, seed=40))
        path = tmp_path / "corpus.jsonl"
        write_graphs(path, corpus.graphs, splits=corpus.splits)
        loaded = read_graphs(path)
        assert [g for g, _ in loaded] == list(corpus.graphs)
        assert [s for _, s in loaded] == list(corpus.splits)
