"""Structure-and-attribute matching score between two graphs.

Both graphs decompose into triples: instance triples (one per semantics
node, labeled; plus one per spanned token when the syntactic level is
present), edge triples (argument edges between semantics nodes, and
head/non-head instance edges down to tokens), and attribute triples.
Semantics nodes of the two graphs are aligned by an injective map found
with restarted hill-climbing; syntax tokens are anchored by position, so
they never need aligning.  Node identity is by string match: a node may
only align to a node with an equal label, and all structural credit flows
through such pairs.  Edge triples count when both endpoints align and the
relation matches; attribute triples contribute fractional credit

    1 - ((a - b) / 6)^2

when their carriers align and the property names agree.  Precision is
matched mass over predicted triples, recall over gold triples.  Empty
sides score 0 (0/0 is defined as 0), so empty predictions are scorable.

``brute_force_match`` enumerates every injective alignment within the
label-equal candidate pool and is the exact oracle for the hill climber
on small graphs.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import node_label, semantic_subgraph
from .inventory import VALUE_MAX, VALUE_MIN

OMEGA = 6.0  # maximum possible difference between attribute values


class ValueRangeError(Exception):
    pass


class TooLargeError(Exception):
    pass


class IdMismatchError(Exception):
    pass


def attribute_similarity(a, b):
    """Quadratic similarity on [0, 1]; 1 at equality, 0 at maximal distance."""
    for x in (a, b):
        if not VALUE_MIN <= x <= VALUE_MAX:
            raise ValueRangeError(f"attribute value {x} outside [{VALUE_MIN}, {VALUE_MAX}]")
    sim = 1.0 - ((a - b) / OMEGA) ** 2
    return min(1.0, max(0.0, sim))


@dataclass(frozen=True)
class TripleSet:
    node_ids: tuple          # alignable semantics node ids
    labels: dict             # node id -> label
    syntax_tokens: dict      # token index -> form (tokens inside some yield)
    sem_edges: frozenset     # (head id, dep id); relation is always "argument"
    instance_edges: frozenset  # (node id, token index, "head"|"nonhead")
    node_attrs: dict         # (node id, property) -> value
    edge_attrs: dict         # (head id, dep id, property) -> value

    def size(self, include_attributes):
        total = (
            len(self.node_ids) + len(self.syntax_tokens)
            + len(self.sem_edges) + len(self.instance_edges)
        )
        if include_attributes:
            total += len(self.node_attrs) + len(self.edge_attrs)
        return total


def graph_triples(graph):
    """Decompose a graph into its matchable triples.

    Gold-side attribute triples come from confidence > 0 records; on
    predicted graphs every stored record participates (the parser only
    stores mask-fired attributes, and forced decodes supply the rest
    deliberately).
    """
    labels = {n.node_id: node_label(graph, n) for n in graph.semantics_nodes}
    syntax_tokens = {}
    instance_edges = set()
    for e in graph.instance_edges:
        syntax_tokens[e.token_index] = graph.tokens[e.token_index].form
        instance_edges.add((e.node_id, e.token_index, "head" if e.is_head else "nonhead"))
    sem_edges = frozenset((e.head, e.dep) for e in graph.semantics_edges)

    def keep(record):
        return graph.predicted or record.confidence > 0.0

    node_attrs = {
        (n.node_id, prop): rec.value
        for n in graph.semantics_nodes
        for prop, rec in n.attributes.items()
        if keep(rec)
    }
    edge_attrs = {
        (e.head, e.dep, prop): rec.value
        for e in graph.semantics_edges
        for prop, rec in e.attributes.items()
        if keep(rec)
    }
    return TripleSet(
        node_ids=tuple(labels),
        labels=labels,
        syntax_tokens=syntax_tokens,
        sem_edges=sem_edges,
        instance_edges=frozenset(instance_edges),
        node_attrs=node_attrs,
        edge_attrs=edge_attrs,
    )


@dataclass(frozen=True)
class MatchResult:
    alignment: dict
    matched_instance: int
    matched_edge: int
    matched_attribute: float
    pred_triples: int
    gold_triples: int

    @property
    def matched_total(self):
        return self.matched_instance + self.matched_edge + self.matched_attribute

    @property
    def precision(self):
        return self.matched_total / self.pred_triples if self.pred_triples else 0.0

    @property
    def recall(self):
        return self.matched_total / self.gold_triples if self.gold_triples else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _score_alignment(pred, gold, mapping, include_attributes):
    matched_i = 0
    for nid in pred.node_ids:
        g = mapping.get(nid)
        if g is not None and pred.labels[nid] == gold.labels.get(g):
            matched_i += 1
    for tok, form in pred.syntax_tokens.items():
        if gold.syntax_tokens.get(tok) == form:
            matched_i += 1

    matched_e = 0
    for h, d in pred.sem_edges:
        gh, gd = mapping.get(h), mapping.get(d)
        if gh is not None and gd is not None and (gh, gd) in gold.sem_edges:
            matched_e += 1
    for nid, tok, rel in pred.instance_edges:
        g = mapping.get(nid)
        if g is not None and (g, tok, rel) in gold.instance_edges:
            matched_e += 1

    matched_a = 0.0
    if include_attributes:
        for (nid, prop), value in pred.node_attrs.items():
            g = mapping.get(nid)
            if g is None:
                continue
            gold_value = gold.node_attrs.get((g, prop))
            if gold_value is not None:
                matched_a += attribute_similarity(value, gold_value)
        for (h, d, prop), value in pred.edge_attrs.items():
            gh, gd = mapping.get(h), mapping.get(d)
            if gh is None or gd is None:
                continue
            gold_value = gold.edge_attrs.get((gh, gd, prop))
            if gold_value is not None:
                matched_a += attribute_similarity(value, gold_value)
    return matched_i, matched_e, matched_a


def _result(pred, gold, mapping, include_attributes):
    i, e, a = _score_alignment(pred, gold, mapping, include_attributes)
    return MatchResult(
        alignment=dict(mapping),
        matched_instance=i,
        matched_edge=e,
        matched_attribute=a,
        pred_triples=pred.size(include_attributes),
        gold_triples=gold.size(include_attributes),
    )


def _candidate_pool(pred, gold):
    """Label-equal alignment candidates per predicted node."""
    by_label = {}
    for g in gold.node_ids:
        by_label.setdefault(gold.labels[g], []).append(g)
    return {nid: tuple(by_label.get(pred.labels[nid], ())) for nid in pred.node_ids}


def _greedy_label_init(pred, candidates):
    mapping = {}
    taken = set()
    for nid in pred.node_ids:
        for g in candidates[nid]:
            if g not in taken:
                mapping[nid] = g
                taken.add(g)
                break
    return mapping


def _random_init(pred, candidates, rng):
    mapping = {}
    taken = set()
    order = list(pred.node_ids)
    rng.shuffle(order)
    for nid in order:
        free = [g for g in candidates[nid] if g not in taken]
        if free:
            g = free[rng.integers(0, len(free))]
            mapping[nid] = g
            taken.add(g)
    return mapping


def _climb(pred, gold, candidates, mapping, include_attributes):
    """Greedy best-improvement over single-node moves and swaps."""

    def total(m):
        i, e, a = _score_alignment(pred, gold, m, include_attributes)
        return i + e + a

    score = total(mapping)
    while True:
        best_gain = 1e-12
        best_mapping = None
        holder = {g: p for p, g in mapping.items()}
        for nid in pred.node_ids:
            current = mapping.get(nid)
            for g in candidates[nid]:
                if g == current:
                    continue
                candidate = dict(mapping)
                other = holder.get(g)
                if other is not None:
                    # swap: the displaced node takes nid's slot if legal
                    if current is not None and current in candidates[other]:
                        candidate[other] = current
                    else:
                        del candidate[other]
                candidate[nid] = g
                gain = total(candidate) - score
                if gain > best_gain:
                    best_gain = gain
                    best_mapping = candidate
        if best_mapping is None:
            return mapping, score
        mapping = best_mapping
        score += best_gain


def s_score(pred_graph, gold_graph, include_attributes=False, restarts=8, seed=0):
    """Best alignment found by seeded restarted hill-climbing."""
    pred = graph_triples(pred_graph)
    gold = graph_triples(gold_graph)
    candidates = _candidate_pool(pred, gold)
    rng = np.random.default_rng(seed)
    best = None
    for restart in range(max(1, restarts)):
        if restart == 0:
            mapping = _greedy_label_init(pred, candidates)
        else:
            mapping = _random_init(pred, candidates, rng)
        mapping, score = _climb(pred, gold, candidates, mapping, include_attributes)
        if best is None or score > best[0]:
            best = (score, mapping)
    return _result(pred, gold, best[1], include_attributes)


def brute_force_match(pred_graph, gold_graph, include_attributes=False, limit=8):
    """Exact optimum over all label-compatible injective alignments."""
    pred = graph_triples(pred_graph)
    gold = graph_triples(gold_graph)
    n_pred, n_gold = len(pred.node_ids), len(gold.node_ids)
    if min(n_pred, n_gold) > limit:
        raise TooLargeError(
            f"brute force limited to {limit} alignable nodes, got {n_pred}x{n_gold}"
        )
    candidates = _candidate_pool(pred, gold)
    best = {"score": -1.0, "mapping": {}}
    mapping = {}
    taken = set()

    def recurse(index):
        if index == n_pred:
            i, e, a = _score_alignment(pred, gold, mapping, include_attributes)
            if i + e + a > best["score"]:
                best["score"] = i + e + a
                best["mapping"] = dict(mapping)
            return
        nid = pred.node_ids[index]
        for g in candidates[nid]:
            if g in taken:
                continue
            mapping[nid] = g
            taken.add(g)
            recurse(index + 1)
            del mapping[nid]
            taken.discard(g)
        recurse(index + 1)  # leave nid unaligned

    recurse(0)
    return _result(pred, gold, best["mapping"], include_attributes)


@dataclass(frozen=True)
class CorpusEvalResult:
    precision: float
    recall: float
    f1: float
    per_sentence: dict  # sentence id -> MatchResult


def corpus_eval(pred_graphs, gold_graphs, semantics_only=False,
                include_attributes=False, restarts=8, seed=0, threads=1):
    """Micro-aggregated matching over a corpus paired by sentence id."""
    pred_by_id = {g.sentence_id: g for g in pred_graphs}
    gold_by_id = {g.sentence_id: g for g in gold_graphs}
    if set(pred_by_id) != set(gold_by_id):
        missing = set(pred_by_id) ^ set(gold_by_id)
        raise IdMismatchError(f"unpaired sentence ids: {sorted(missing)[:5]}")

    ids = sorted(pred_by_id)

    def score_one(args):
        index, sentence_id = args
        pred = pred_by_id[sentence_id]
        gold = gold_by_id[sentence_id]
        if semantics_only:
            pred = semantic_subgraph(pred)
            gold = semantic_subgraph(gold)
        return sentence_id, s_score(
            pred, gold, include_attributes=include_attributes,
            restarts=restarts, seed=seed + index,
        )

    tasks = list(enumerate(ids))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(score_one, tasks))
    else:
        results = [score_one(t) for t in tasks]

    per_sentence = dict(results)
    matched = sum(r.matched_total for r in per_sentence.values())
    pred_total = sum(r.pred_triples for r in per_sentence.values())
    gold_total = sum(r.gold_triples for r in per_sentence.values())
    precision = matched / pred_total if pred_total else 0.0
    recall = matched / gold_total if gold_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return CorpusEvalResult(precision=precision, recall=recall, f1=f1,
                            per_sentence=per_sentence)
