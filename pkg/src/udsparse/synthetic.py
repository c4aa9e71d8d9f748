"""Deterministic synthetic corpus generation for desk-scale experiments.

Four sentence constructions cover the structural phenomena the tree
builder and parser must handle:

  * ``simple``     transitive clause with single-token arguments
  * ``multiword``  transitive clause with determiner/adjective spans
  * ``embedding``  clausal complement ("Alice said Bob left"): the clause
                   argument dominates an embedded predicate and surfaces
                   as a SOMETHING node
  * ``control``    object control ("Alice persuaded Bob to leave"): the
                   object is also the embedded subject, giving the node
                   two parents (re-entrancy)

Gold attribute values are drawn from a latent-factor model: a correlation
matrix is assembled from per-pair targets, and node/edge values are affine
images of shared Gaussian factors, scaled and clipped to [-3, 3].  This is
what gives attribute pairs the nonzero correlations the correlational
analysis needs.  Proto-role attributes go on predicate->argument edges
only; the clause edge from a SOMETHING node down to its predicate carries
none.
"""

from dataclasses import dataclass, field

import numpy as np

import json

from .graph import (
    AttributeRecord,
    InstanceEdge,
    SemanticsEdge,
    SemanticsNode,
    Token,
    UDSGraph,
    validate_graph,
)
from .io import FormatError, graph_from_dict, write_graphs
from .inventory import (
    ARGUMENT_PROPERTIES,
    EDGE_PROPERTIES,
    NODE_PROPERTIES,
    PREDICATE_PROPERTIES,
)

NAMES = ("Alice", "Bob", "Carol", "Dave", "Eve", "Frank", "Grace", "Heidi",
         "Ivan", "Judy", "Kevin", "Laura")
NOUNS = ("wizard", "teacher", "farmer", "doctor", "pilot", "singer",
         "mayor", "sailor")
ADJECTIVES = ("old", "young", "tall", "clever", "quiet")
TRANSITIVE_VERBS = ("praised", "blamed", "hugged", "thanked", "greeted",
                    "admired", "trusted", "ignored")
SPEECH_VERBS = ("said", "claimed", "heard", "believed")
CONTROL_VERBS = ("persuaded", "asked", "forced", "urged")
PLAIN_VERBS = ("leave", "resign", "smile", "wave")
PAST_VERBS = ("left", "resigned", "smiled", "waved")

CONSTRUCTIONS = ("simple", "multiword", "embedding", "control")
SPLITS = ("train", "dev", "test")


class ParseError(Exception):
    """A corpus line could not be read."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CorpusValidationError(Exception):
    """A corpus line decoded but failed graph validation."""

    def __init__(self, line, report):
        codes = ", ".join(sorted({code for code, _, _ in report.errors}))
        super().__init__(f"line {line}: invalid graph ({codes})")
        self.line = line
        self.report = report


@dataclass(frozen=True)
class SyntheticGrammarConfig:
    sentence_count: int = 64
    seed: int = 0
    # fractions over (simple, multiword, embedding, control); must sum to 1
    construction_mix: tuple = (0.4, 0.2, 0.2, 0.2)
    # (property a, property b, target gold correlation); properties must share
    # a carrier (both predicate-node, both argument-node, or both edge)
    attribute_correlations: tuple = (
        ("volition", "awareness", 0.85),
        ("volition", "sentient", 0.8),
        ("existed-before", "existed-during", 0.7),
        ("genericity-pred-particular", "factuality-factual", 0.6),
        ("time-dur-days", "time-dur-weeks", 0.7),
        ("genericity-arg-particular", "genericity-arg-kind", -0.6),
        ("supersense-noun.person", "genericity-arg-particular", 0.5),
    )
    annotation_density: float = 0.7
    confidence_low: float = 0.6
    confidence_high: float = 1.0
    split_fractions: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if abs(sum(self.construction_mix) - 1.0) > 1e-9:
            raise ValueError("construction mix fractions must sum to 1")
        if len(self.construction_mix) != len(CONSTRUCTIONS):
            raise ValueError(f"construction mix needs {len(CONSTRUCTIONS)} entries")
        for a, b, rho in self.attribute_correlations:
            if not -1.0 <= rho <= 1.0:
                raise ValueError(f"target correlation {rho} for ({a}, {b}) outside [-1, 1]")


@dataclass(frozen=True)
class Corpus:
    graphs: tuple = ()
    splits: tuple = ()  # parallel to graphs, entries from SPLITS

    def subset(self, split):
        return tuple(g for g, s in zip(self.graphs, self.splits) if s == split)

    def __len__(self):
        return len(self.graphs)


def _correlation_chol(properties, targets):
    """Cholesky factor of the (PSD-repaired) target correlation matrix."""
    k = len(properties)
    index = {p: i for i, p in enumerate(properties)}
    corr = np.eye(k)
    for a, b, rho in targets:
        if a in index and b in index:
            corr[index[a], index[b]] = rho
            corr[index[b], index[a]] = rho
    # clip eigenvalues to keep the matrix positive definite, then rescale
    # the diagonal back to 1
    vals, vecs = np.linalg.eigh(corr)
    vals = np.clip(vals, 1e-6, None)
    corr = vecs @ np.diag(vals) @ vecs.T
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    return np.linalg.cholesky(corr)


class _AttributeSampler:
    """Draws correlated attribute maps for one carrier type."""

    # clipping at 2.5 sigma barely attenuates the factor correlations
    SCALE = 1.2

    def __init__(self, properties, targets, cfg, rng):
        self.properties = properties
        self.chol = _correlation_chol(properties, targets)
        self.cfg = cfg
        self.rng = rng

    def sample(self, applicable):
        values = self.chol @ self.rng.standard_normal(len(self.properties))
        values = np.clip(self.SCALE * values, -3.0, 3.0)
        attrs = {}
        for prop, value in zip(self.properties, values):
            if prop not in applicable:
                continue
            if self.rng.random() >= self.cfg.annotation_density:
                continue
            conf = self.rng.uniform(self.cfg.confidence_low, self.cfg.confidence_high)
            attrs[prop] = AttributeRecord(value=float(value), confidence=float(conf))
        return attrs


class _SentenceBuilder:
    def __init__(self, sentence_id, node_sampler, edge_sampler):
        self.sentence_id = sentence_id
        self.node_sampler = node_sampler
        self.edge_sampler = edge_sampler
        self.tokens = []
        self.nodes = []
        self.edges = []
        self.instance = []

    def token(self, form, pos):
        self.tokens.append(Token(form=form, pos=pos))
        return len(self.tokens) - 1

    def predicate(self, head, extra=()):
        return self._node("predicate", head, extra, PREDICATE_PROPERTIES)

    def argument(self, head, extra=(), annotate=True):
        props = ARGUMENT_PROPERTIES if annotate else ()
        return self._node("argument", head, extra, props)

    def _node(self, kind, head, extra, props):
        prefix = "semantics-pred" if kind == "predicate" else "semantics-arg"
        node_id = f"{prefix}-{head}"
        attrs = self.node_sampler.sample(set(props)) if props else {}
        self.nodes.append(SemanticsNode(node_id=node_id, kind=kind, attributes=attrs))
        self.instance.append(InstanceEdge(node_id, head, is_head=True))
        for tok in extra:
            self.instance.append(InstanceEdge(node_id, tok, is_head=False))
        return node_id

    def edge(self, head, dep, protoroles=False):
        attrs = self.edge_sampler.sample(set(EDGE_PROPERTIES)) if protoroles else {}
        self.edges.append(SemanticsEdge(head=head, dep=dep, attributes=attrs))

    def graph(self):
        return UDSGraph(
            sentence_id=self.sentence_id,
            tokens=tuple(self.tokens),
            semantics_nodes=tuple(self.nodes),
            semantics_edges=tuple(self.edges),
            instance_edges=tuple(self.instance),
        )


def _noun_phrase(b, rng, multiword):
    """Emit an argument span; returns (head token index, extra token indices)."""
    if not multiword or rng.random() < 0.3:
        return b.token(str(rng.choice(NAMES)), "NNP"), ()
    det = b.token("the", "DT")
    extra = [det]
    if rng.random() < 0.7:
        extra.append(b.token(str(rng.choice(ADJECTIVES)), "JJ"))
    head = b.token(str(rng.choice(NOUNS)), "NN")
    return head, tuple(extra)


def _build_sentence(kind, b, rng):
    if kind in ("simple", "multiword"):
        multi = kind == "multiword"
        s_head, s_extra = _noun_phrase(b, rng, multi)
        verb = b.token(str(rng.choice(TRANSITIVE_VERBS)), "VBD")
        o_head, o_extra = _noun_phrase(b, rng, multi)
        pred = b.predicate(verb)
        subj = b.argument(s_head, s_extra)
        obj = b.argument(o_head, o_extra)
        b.edge(pred, subj, protoroles=True)
        b.edge(pred, obj, protoroles=True)
    elif kind == "embedding":
        s_head, s_extra = _noun_phrase(b, rng, False)
        verb = b.token(str(rng.choice(SPEECH_VERBS)), "VBD")
        e_subj = b.token(str(rng.choice(NAMES)), "NNP")
        e_verb = b.token(str(rng.choice(PAST_VERBS)), "VBD")
        pred = b.predicate(verb)
        subj = b.argument(s_head, s_extra)
        clause = b.argument(e_verb, annotate=False)
        inner = b.predicate(e_verb)
        inner_subj = b.argument(e_subj)
        b.edge(pred, subj, protoroles=True)
        b.edge(pred, clause)
        b.edge(clause, inner)
        b.edge(inner, inner_subj, protoroles=True)
    elif kind == "control":
        s_head, s_extra = _noun_phrase(b, rng, False)
        verb = b.token(str(rng.choice(CONTROL_VERBS)), "VBD")
        o_head = b.token(str(rng.choice(NAMES)), "NNP")
        to = b.token("to", "TO")
        e_verb = b.token(str(rng.choice(PLAIN_VERBS)), "VB")
        pred = b.predicate(verb)
        subj = b.argument(s_head, s_extra)
        obj = b.argument(o_head)
        clause = b.argument(e_verb, extra=(to,), annotate=False)
        inner = b.predicate(e_verb)
        b.edge(pred, subj, protoroles=True)
        b.edge(pred, obj, protoroles=True)
        b.edge(pred, clause)
        b.edge(clause, inner)
        b.edge(inner, obj, protoroles=True)  # re-entrant object
    else:
        raise ValueError(f"unknown construction {kind!r}")


def generate_synthetic(cfg):
    """Generate a validated corpus; identical configs give identical output."""
    rng = np.random.default_rng(cfg.seed)
    node_targets = [
        (a, b, r) for a, b, r in cfg.attribute_correlations
        if a in NODE_PROPERTIES and b in NODE_PROPERTIES
    ]
    edge_targets = [
        (a, b, r) for a, b, r in cfg.attribute_correlations
        if a in EDGE_PROPERTIES and b in EDGE_PROPERTIES
    ]
    node_sampler = _AttributeSampler(NODE_PROPERTIES, node_targets, cfg, rng)
    edge_sampler = _AttributeSampler(EDGE_PROPERTIES, edge_targets, cfg, rng)

    counts = _construction_counts(cfg)
    order = []
    for kind, count in zip(CONSTRUCTIONS, counts):
        order.extend([kind] * count)
    rng.shuffle(order)

    graphs = []
    for i, kind in enumerate(order):
        b = _SentenceBuilder(f"syn-{cfg.seed}-{i:05d}", node_sampler, edge_sampler)
        _build_sentence(kind, b, rng)
        graphs.append(b.graph())

    n = len(graphs)
    n_train = int(round(cfg.split_fractions[0] * n))
    n_dev = int(round(cfg.split_fractions[1] * n))
    splits = ["train"] * n_train + ["dev"] * n_dev + ["test"] * (n - n_train - n_dev)
    splits = splits[:n]
    return Corpus(graphs=tuple(graphs), splits=tuple(splits))


def _construction_counts(cfg):
    n = cfg.sentence_count
    counts = [int(frac * n) for frac in cfg.construction_mix]
    # assign remainder to the largest fractions, deterministically
    remainder = n - sum(counts)
    by_frac = sorted(range(len(counts)), key=lambda i: -cfg.construction_mix[i])
    for i in range(remainder):
        counts[by_frac[i % len(counts)]] += 1
    return counts


def save_corpus(path, corpus):
    write_graphs(path, corpus.graphs, splits=corpus.splits)


def load_corpus(path, split=None, validate=True):
    """Read a corpus file, optionally filtered to one split.

    Raises ParseError for undecodable lines and CorpusValidationError when a
    graph violates the data-model invariants; both carry the line number.
    """
    graphs = []
    splits = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                graph, line_split = graph_from_dict(record, where=f"line {lineno}: ")
            except (ValueError, FormatError) as exc:
                raise ParseError(lineno, str(exc)) from exc
            if validate:
                report = validate_graph(graph)
                if not report.is_valid:
                    raise CorpusValidationError(lineno, report)
            line_split = line_split or "train"
            if split is not None and line_split != split:
                continue
            graphs.append(graph)
            splits.append(line_split)
    return Corpus(graphs=tuple(graphs), splits=tuple(splits))
