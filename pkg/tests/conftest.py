import json
import os

import pytest

from udsparse.io import arborescence_from_dict, graph_from_dict

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def load_fixture_graph(name="object_control_graph.jsonl"):
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as fh:
        record = json.loads(fh.readline())
    graph, _ = graph_from_dict(record)
    return graph


def load_fixture_arborescence(name="object_control_arborescence.json"):
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as fh:
        record = json.load(fh)
    return arborescence_from_dict(record)


@pytest.fixture
def object_control_graph():
    return load_fixture_graph()


@pytest.fixture
def object_control_arborescence():
    return load_fixture_arborescence()
