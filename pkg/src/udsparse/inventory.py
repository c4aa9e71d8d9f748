"""Fixed inventory of scalar attribute names carried by semantic graphs.

Node-level attributes cover factuality, genericity, event duration, and
noun supersenses (44 names total).  Edge-level attributes are the 14
proto-role properties.  All other modules index attributes through this
inventory, so the orderings below are load-bearing: matrices produced by
the model and the analysis code use these column orders.
"""

from dataclasses import dataclass, field

NODE_PROPERTIES = (
    "factuality-factual",
    # genericity (3 argument-side, 3 predicate-side)
    "genericity-arg-abstract",
    "genericity-arg-kind",
    "genericity-arg-particular",
    "genericity-pred-dynamic",
    "genericity-pred-hypothetical",
    "genericity-pred-particular",
    # event duration buckets
    "time-dur-centuries",
    "time-dur-days",
    "time-dur-decades",
    "time-dur-forever",
    "time-dur-hours",
    "time-dur-instant",
    "time-dur-minutes",
    "time-dur-months",
    "time-dur-seconds",
    "time-dur-weeks",
    "time-dur-years",
    # noun supersenses
    "supersense-noun.Tops",
    "supersense-noun.act",
    "supersense-noun.animal",
    "supersense-noun.artifact",
    "supersense-noun.attribute",
    "supersense-noun.body",
    "supersense-noun.cognition",
    "supersense-noun.communication",
    "supersense-noun.event",
    "supersense-noun.feeling",
    "supersense-noun.food",
    "supersense-noun.group",
    "supersense-noun.location",
    "supersense-noun.motive",
    "supersense-noun.object",
    "supersense-noun.person",
    "supersense-noun.phenomenon",
    "supersense-noun.plant",
    "supersense-noun.possession",
    "supersense-noun.process",
    "supersense-noun.quantity",
    "supersense-noun.relation",
    "supersense-noun.shape",
    "supersense-noun.state",
    "supersense-noun.substance",
    "supersense-noun.time",
)

EDGE_PROPERTIES = (
    "awareness",
    "change-of-location",
    "change-of-possession",
    "change-of-state",
    "change-of-state-continuous",
    "existed-after",
    "existed-before",
    "existed-during",
    "instigation",
    "partitive",
    "sentient",
    "volition",
    "was-for-benefit",
    "was-used",
)

# Which node properties can be annotated on which node kind.  Factuality,
# predicate genericity, and durations describe events; argument genericity
# and supersenses describe entities.
PREDICATE_PROPERTIES = tuple(
    p for p in NODE_PROPERTIES
    if p == "factuality-factual" or p.startswith("genericity-pred") or p.startswith("time-dur")
)
ARGUMENT_PROPERTIES = tuple(
    p for p in NODE_PROPERTIES
    if p.startswith("genericity-arg") or p.startswith("supersense")
)

VALUE_MIN = -3.0
VALUE_MAX = 3.0


@dataclass(frozen=True)
class AttributeInventory:
    """Ordered attribute name lists shared by every module."""

    node_properties: tuple = NODE_PROPERTIES
    edge_properties: tuple = EDGE_PROPERTIES
    _node_index: dict = field(default=None, repr=False, compare=False)
    _edge_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_node_index", {name: i for i, name in enumerate(self.node_properties)}
        )
        object.__setattr__(
            self, "_edge_index", {name: i for i, name in enumerate(self.edge_properties)}
        )

    def node_index(self, name):
        return self._node_index[name]

    def edge_index(self, name):
        return self._edge_index[name]

    def is_node_property(self, name):
        return name in self._node_index

    def is_edge_property(self, name):
        return name in self._edge_index


DEFAULT_INVENTORY = AttributeInventory()
