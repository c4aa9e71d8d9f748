"""Toolkit for attributed semantic graphs: tree conversion, a toy
transductive parser with scalar attribute prediction, structure matching,
and correlational evaluation."""

__version__ = "0.1.0"

from .arborescence import (
    Arborescence,
    SemanticRelation,
    build_arborescence,
    delinearize,
    linearize,
    to_graph,
)
from .graph import (
    AttributeRecord,
    InstanceEdge,
    SemanticsEdge,
    SemanticsNode,
    Token,
    UDSGraph,
    ValidationReport,
    semantic_subgraph,
    strip_performative_nodes,
    validate_graph,
)
from .inventory import EDGE_PROPERTIES, NODE_PROPERTIES, AttributeInventory
