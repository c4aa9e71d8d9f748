"""Loss terms and the optimization loop.

Structural prediction (node, head, relation) trains with cross-entropy
plus a coverage penalty that discourages re-attending to source tokens.
Attribute masks train with binary cross-entropy per position.  Attribute
values train with a confidence-weighted combination: an MSE term and a
sign-agreement term (binary cross-entropy of sigmoid(value) against the
thresholded gold sign -- the hard threshold itself has no usable
gradient), merged by a harmonic mean and scaled by gamma.  Annotator
confidences mask both value terms; "binary" mode thresholds the
confidences to {0, 1}, keeping the masking but dropping the weighting.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .arborescence import linearize
from .rng import XorShiftRNG


class LengthMismatchError(Exception):
    pass


def tau(x):
    """Hard sign threshold: 0 for x <= 0, else 1."""
    arr = np.asarray(x, dtype=np.float64)
    out = (arr > 0).astype(np.float64)
    if arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TrainingConfig:
    gamma: float = 1.0
    mode: str = "confidence"  # "confidence" | "binary"
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 8
    coverage_weight: float = 1.0
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # stop once the epoch-mean total loss drops below this
    early_stop_loss: float | None = None
    # the confidence weighting normally applies only to the value losses;
    # this extends it to the mask BCE as well
    weight_mask_by_confidence: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.mode not in ("confidence", "binary"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("epochs/batch size must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    node_xent: float
    head_xent: float
    relation_xent: float
    coverage: float
    mask_bce: float
    attr_combined: float
    coverage_weight: float = 1.0

    @property
    def total(self):
        return (
            self.node_xent + self.head_xent + self.relation_xent
            + self.coverage_weight * self.coverage
            + self.mask_bce + self.attr_combined
        )

    def as_dict(self):
        return {
            "node_xent": self.node_xent,
            "head_xent": self.head_xent,
            "relation_xent": self.relation_xent,
            "coverage": self.coverage,
            "mask_bce": self.mask_bce,
            "attr_combined": self.attr_combined,
            "total": self.total,
        }


def attribute_loss(values, gold_values, confidence, gamma, mode="confidence"):
    """Harmonic combination of confidence-masked MSE and sign-agreement BCE.

    ``values`` may be a tensor (gradients flow) or a plain array; gold
    values and confidences are arrays of the same shape.  Returns a scalar
    tensor.  With every confidence zero, or both terms zero, the loss is
    exactly zero.
    """
    values = values if isinstance(values, ad.Tensor) else ad.constant(values)
    gold = np.asarray(gold_values, dtype=np.float64)
    conf = np.asarray(confidence, dtype=np.float64)
    if gold.shape != values.data.shape or conf.shape != values.data.shape:
        raise ad.ShapeMismatchError(
            f"attribute loss shapes: {values.data.shape}, {gold.shape}, {conf.shape}"
        )
    if mode == "binary":
        conf = tau(conf)
    elif mode != "confidence":
        raise ValueError(f"unknown mode {mode!r}")
    size = float(values.data.size)

    diff = ad.sub(values, ad.constant(gold))
    mse = ad.mul(ad.sum_all(ad.mul(ad.mul(diff, diff), ad.constant(conf))),
                 ad.constant(1.0 / size))
    bce = ad.bce_with_logits(values, tau(gold), weights=conf)
    if float(mse.data) + float(bce.data) == 0.0:
        return ad.constant(0.0)
    harmonic = ad.div(ad.mul(ad.mul(mse, bce), ad.constant(2.0)), ad.add(mse, bce))
    return ad.mul(harmonic, ad.constant(float(gamma)))


def edge_attribute_loss(values, gold_values, confidence, gamma, mode="confidence"):
    """Identical contract over the 14 edge properties."""
    return attribute_loss(values, gold_values, confidence, gamma, mode)


def mask_loss(mask_probs, gold_mask):
    """Mean binary cross-entropy of mask probabilities against gold bits.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the logs.
    """
    probs = mask_probs if isinstance(mask_probs, ad.Tensor) else ad.constant(mask_probs)
    gold = np.asarray(gold_mask, dtype=np.float64)
    if gold.shape != probs.data.shape:
        raise ad.ShapeMismatchError(f"mask loss shapes: {probs.data.shape} vs {gold.shape}")
    eps = 1e-12
    p = ad.maximum(ad.minimum(probs, ad.constant(1.0 - eps)), ad.constant(eps))
    term = ad.add(
        ad.mul(ad.constant(gold), ad.log(p)),
        ad.mul(ad.constant(1.0 - gold), ad.log(ad.sub(ad.constant(1.0), p))),
    )
    return ad.neg(ad.mean_all(term))


def structural_loss(forcing, coverage_weight=1.0):
    """Cross-entropy parts plus the coverage penalty from one forced pass.

    Returns a dict of scalar tensors keyed node_xent / head_xent /
    relation_xent / coverage.  Head and relation term counts must match
    (one per attached node); the node term has one extra entry for the
    end-of-graph decision.
    """
    if len(forcing.head_nll) != len(forcing.relation_nll):
        raise LengthMismatchError(
            f"{len(forcing.head_nll)} head terms vs {len(forcing.relation_nll)} relation terms"
        )
    if len(forcing.node_nll) != len(forcing.head_nll) + 1:
        raise LengthMismatchError(
            f"{len(forcing.node_nll)} node terms for {len(forcing.head_nll)} nodes"
        )

    def mean_terms(terms):
        if not terms:
            return ad.constant(0.0)
        total = terms[0]
        for t in terms[1:]:
            total = ad.add(total, t)
        return ad.mul(total, ad.constant(1.0 / len(terms)))

    coverage = ad.constant(0.0)
    if forcing.attentions:
        cov = ad.constant(np.zeros(forcing.n_tokens))
        terms = []
        for att in forcing.attentions:
            terms.append(ad.sum_all(ad.minimum(att, cov)))
            cov = ad.add(cov, att)
        coverage = mean_terms(terms)

    return {
        "node_xent": mean_terms(forcing.node_nll),
        "head_xent": mean_terms(forcing.head_nll),
        "relation_xent": mean_terms(forcing.relation_nll),
        "coverage": coverage,
    }


def _stack_attribute_rows(rows, gold_lookup, properties):
    """Stack per-row head tensors and gather gold arrays for the loss."""
    logits = ad.stack_rows([mask for _, mask, _ in rows])
    values = ad.stack_rows([value for _, _, value in rows])
    gold = np.zeros((len(rows), len(properties)))
    conf = np.zeros((len(rows), len(properties)))
    for i, (key, _, _) in enumerate(rows):
        attrs = gold_lookup(key)
        for j, prop in enumerate(properties):
            rec = attrs.get(prop)
            if rec is not None and rec.confidence > 0:
                gold[i, j] = rec.value
                conf[i, j] = rec.confidence
    return logits, values, gold, conf


def sentence_loss(parser, arbor, cfg, train=False, dropout_rng=None):
    """Total loss tensor and its breakdown for one gold arborescence."""
    from .inventory import EDGE_PROPERTIES, NODE_PROPERTIES

    tokens = [t.form for t in arbor.tokens]
    pos_tags = [t.pos for t in arbor.tokens]
    relations = linearize(arbor)
    forcing = parser.forward_teacher(
        tokens, pos_tags, relations, train=train, dropout_rng=dropout_rng
    )

    parts = structural_loss(forcing, cfg.coverage_weight)
    mask_terms = []
    attr_terms = []

    if forcing.node_rows:
        logits, values, gold, conf = _stack_attribute_rows(
            forcing.node_rows, lambda pos: arbor.nodes[pos].attributes, NODE_PROPERTIES
        )
        weights = conf if cfg.weight_mask_by_confidence else None
        mask_terms.append(ad.bce_with_logits(logits, tau(conf), weights=weights))
        attr_terms.append(attribute_loss(values, gold, conf, cfg.gamma, cfg.mode))
    if forcing.edge_rows:
        edge_attrs = {(e.head, e.dep): e.attributes for e in arbor.edges}
        logits, values, gold, conf = _stack_attribute_rows(
            forcing.edge_rows, lambda pair: edge_attrs[pair], EDGE_PROPERTIES
        )
        weights = conf if cfg.weight_mask_by_confidence else None
        mask_terms.append(ad.bce_with_logits(logits, tau(conf), weights=weights))
        attr_terms.append(edge_attribute_loss(values, gold, conf, cfg.gamma, cfg.mode))

    def total_of(terms):
        if not terms:
            return ad.constant(0.0)
        out = terms[0]
        for t in terms[1:]:
            out = ad.add(out, t)
        return out

    mask_bce = total_of(mask_terms)
    attr_combined = total_of(attr_terms)

    total = ad.add(
        ad.add(parts["node_xent"], ad.add(parts["head_xent"], parts["relation_xent"])),
        ad.add(
            ad.mul(parts["coverage"], ad.constant(cfg.coverage_weight)),
            ad.add(mask_bce, attr_combined),
        ),
    )
    breakdown = LossBreakdown(
        node_xent=float(parts["node_xent"].data),
        head_xent=float(parts["head_xent"].data),
        relation_xent=float(parts["relation_xent"].data),
        coverage=float(parts["coverage"].data),
        mask_bce=float(mask_bce.data),
        attr_combined=float(attr_combined.data),
        coverage_weight=cfg.coverage_weight,
    )
    return total, breakdown


class Adam:
    def __init__(self, store, cfg):
        self.store = store
        self.lr = cfg.learning_rate
        self.beta1 = cfg.adam_beta1
        self.beta2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, grads):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, tensor in self.store.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            tensor.data = tensor.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    parser: object
    log: list  # one dict per epoch: LossBreakdown fields (+ dev_total)
    aborted: bool = False


class NonFiniteLossError(Exception):
    pass


def train(train_graphs, model_config, training_config, dev_graphs=None,
          parser=None, epoch_hook=None):
    """Adam training over gold graphs; deterministic given the seeds.

    Builds vocabularies and the parser from the training graphs unless one
    is passed in.  A non-finite loss aborts and restores the last
    end-of-epoch parameters.  ``epoch_hook(parser, epoch, entry)`` runs
    after each epoch's log entry is assembled.
    """
    from .arborescence import build_arborescence
    from .model import Parser, build_vocabularies

    if not train_graphs:
        raise ValueError("training corpus is empty")
    if parser is None:
        vocabs = build_vocabularies(train_graphs, model_config)
        parser = Parser(model_config, vocabs)

    arbors = [build_arborescence(g) for g in train_graphs]
    dev_arbors = [build_arborescence(g) for g in (dev_graphs or [])]

    optimizer = Adam(parser.params, training_config)
    shuffle_rng = XorShiftRNG(training_config.seed)
    dropout_rng = XorShiftRNG(training_config.seed + 1)
    log = []
    snapshot = parser.params.state_dict()

    for epoch in range(training_config.epochs):
        order = list(range(len(arbors)))
        shuffle_rng.shuffle(order)
        epoch_parts = []
        try:
            for start in range(0, len(order), training_config.batch_size):
                batch = order[start:start + training_config.batch_size]
                accum = {name: np.zeros_like(t.data) for name, t in parser.params.items()}
                for idx in batch:
                    total, breakdown = sentence_loss(
                        parser, arbors[idx], training_config,
                        train=True, dropout_rng=dropout_rng,
                    )
                    if not np.isfinite(total.data):
                        raise NonFiniteLossError(f"sentence {idx} produced {total.data}")
                    grads = ad.backward(total, parser.params)
                    for name in accum:
                        accum[name] += grads[name] / len(batch)
                    epoch_parts.append(breakdown)
                optimizer.step(accum)
        except (NonFiniteLossError, ad.NonFiniteError):
            parser.params.load_state_dict(snapshot)
            return TrainResult(parser=parser, log=log, aborted=True)

        entry = _mean_breakdown(epoch_parts).as_dict()
        entry["epoch"] = epoch
        if dev_arbors:
            dev_totals = [
                float(sentence_loss(parser, a, training_config)[0].data)
                for a in dev_arbors
            ]
            entry["dev_total"] = float(np.mean(dev_totals))
        log.append(entry)
        snapshot = parser.params.state_dict()
        if epoch_hook is not None:
            epoch_hook(parser, epoch, entry)
        if (training_config.early_stop_loss is not None
                and entry["total"] <= training_config.early_stop_loss):
            break

    return TrainResult(parser=parser, log=log, aborted=False)


def _mean_breakdown(parts):
    if not parts:
        return LossBreakdown(0, 0, 0, 0, 0, 0)
    return LossBreakdown(
        node_xent=float(np.mean([p.node_xent for p in parts])),
        head_xent=float(np.mean([p.head_xent for p in parts])),
        relation_xent=float(np.mean([p.relation_xent for p in parts])),
        coverage=float(np.mean([p.coverage for p in parts])),
        mask_bce=float(np.mean([p.mask_bce for p in parts])),
        attr_combined=float(np.mean([p.attr_combined for p in parts])),
        coverage_weight=parts[0].coverage_weight,
    )
