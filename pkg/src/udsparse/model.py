"""Transductive sequence-to-graph parser with scalar attribute heads.

The decoder emits one relation per step.  Consuming node ``i`` (its label
and target-side index) through a stacked LSTM yields hidden state h_i;
the head of node ``i`` is scored biaffinely against all earlier states,
its relation bilinearly against the chosen head; attention over the
encoder states produces a context vector, and an MLP over
[h_i; context; relation; head label; head index] produces the node state
z_i.  A three-way switch over z_i mixes (1) generating a label from a
closed vocabulary, (2) copying a source token, and (3) copying an earlier
semantic node (re-entrancy), into one distribution over the next node.
z_i also feeds the node attribute heads (mask probabilities and values);
argument edges get attribute heads over bilinear combinations of the two
endpoint states.

Decode-time structural constraints keep free output well-formed: heads
are chosen among the root and previously decoded semantic nodes, root
attachments are forced to the "root" relation, and target-copied nodes
attach as arguments.  Training leaves distributions unmasked.
"""

import zlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .arborescence import (
    Arborescence,
    KIND_ARGUMENT,
    KIND_PREDICATE,
    KIND_ROOT,
    KIND_SYNTAX,
    RELATION_ARGUMENT,
    RELATION_NONHEAD,
    RELATION_ROOT,
    RELATIONS,
    ROOT_LABEL,
    SEMANTIC_KINDS,
    SemanticRelation,
    build_arborescence,
    delinearize,
    linearize,
    to_graph,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .graph import AttributeRecord
from .inventory import EDGE_PROPERTIES, NODE_PROPERTIES, VALUE_MAX, VALUE_MIN
from .rng import XorShiftRNG

END_TOKEN = "@end@"
START_RELATION = "@start@"
RELATION_EMBEDDINGS = RELATIONS + (START_RELATION,)
CHAR_PAD = "\x00"


class EmptyInputError(Exception):
    pass


class DecodeOverflowError(Exception):
    pass


class MisalignedError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    token_dim: int = 32
    pos_dim: int = 16
    char_dim: int = 16
    char_filters: int = 16
    char_window: int = 3
    contextual_dim: int = 0
    encoder_hidden: int = 32  # per direction; decoder width is twice this
    num_layers: int = 2
    attention_hidden: int = 64
    relation_mlp_hidden: int = 64
    node_state_dim: int = 64
    index_emb_dim: int = 16
    relation_emb_dim: int = 16
    biaffine_dim: int = 32
    relation_bilinear_dim: int = 32
    edge_bilinear_dim: int = 32
    attr_hidden: int = 64
    max_index: int = 64
    oov_buckets: int = 8
    dropout: float = 0.0
    seed: int = 0
    beam_size: int = 1  # 1 = greedy
    mask_threshold: float = 0.5
    shared_attribute_heads: bool = False

    def __post_init__(self):
        for name in ("token_dim", "pos_dim", "char_dim", "char_filters",
                     "encoder_hidden", "num_layers", "attention_hidden",
                     "relation_mlp_hidden", "node_state_dim", "index_emb_dim",
                     "relation_emb_dim", "biaffine_dim", "relation_bilinear_dim",
                     "edge_bilinear_dim", "attr_hidden", "max_index"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 1 <= self.beam_size <= 5:
            raise ValueError("beam_size must be in [1, 5]")


class Vocabulary:
    """Closed token list plus hash buckets for out-of-vocabulary items."""

    def __init__(self, tokens, oov_buckets=0):
        self.tokens = tuple(tokens)
        self.oov_buckets = oov_buckets
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self):
        return len(self.tokens) + self.oov_buckets

    def id(self, token):
        i = self._index.get(token)
        if i is not None:
            return i
        if not self.oov_buckets:
            raise KeyError(token)
        bucket = zlib.crc32(token.encode("utf-8")) % self.oov_buckets
        return len(self.tokens) + bucket

    def __contains__(self, token):
        return token in self._index

    def to_json(self):
        return {"tokens": list(self.tokens), "oov_buckets": self.oov_buckets}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["tokens"], obj["oov_buckets"])


def build_vocabularies(graphs, config):
    """Vocabularies from training graphs (their tokens and tree labels)."""
    forms, pos_tags, chars, labels = set(), set(), set(), set()
    for graph in graphs:
        for tok in graph.tokens:
            forms.add(tok.form)
            pos_tags.add(tok.pos)
            chars.update(tok.form)
        for rel in linearize(build_arborescence(graph)):
            labels.add(rel.v)
            chars.update(rel.v)
    labels |= {END_TOKEN, ROOT_LABEL}
    gen_labels = sorted(labels)
    embed_labels = sorted(labels | forms)
    return {
        "source": Vocabulary(sorted(forms), config.oov_buckets),
        "pos": Vocabulary(sorted(pos_tags), 1),
        "chars": Vocabulary([CHAR_PAD] + sorted(chars), config.oov_buckets),
        "labels": Vocabulary(embed_labels, config.oov_buckets),
        "generation": Vocabulary(gen_labels, 0),
    }


@dataclass
class EncoderState:
    layer_states: tuple  # one (n, 2H) tensor per layer
    n_tokens: int

    @property
    def top(self):
        return self.layer_states[-1]


class DecoderState:
    """Mutable per-sentence decode state; a single decode is sequential."""

    def __init__(self, h, c, h_history, encoder):
        self.h = h  # per-layer current hidden
        self.c = c
        self.h_history = h_history  # top-layer state per position (0 = root)
        self.z_history = []
        self.kinds = [KIND_ROOT]
        self.labels = [ROOT_LABEL]
        self.anchors = [None]
        self.encoder = encoder
        self.last_attention = None

    @property
    def step(self):
        return len(self.h_history) - 1

    def semantic_positions(self):
        return [i for i, k in enumerate(self.kinds) if k in SEMANTIC_KINDS]

    def clone(self):
        other = DecoderState(list(self.h), list(self.c), list(self.h_history), self.encoder)
        other.z_history = list(self.z_history)
        other.kinds = list(self.kinds)
        other.labels = list(self.labels)
        other.anchors = list(self.anchors)
        other.last_attention = self.last_attention
        return other


@dataclass
class AttributePrediction:
    """Per-node and per-edge attribute heads for one (gold) structure."""

    node_indices: tuple  # arborescence positions
    node_graph_ids: tuple  # canonical graph node id, None for duplicates
    node_mask: np.ndarray  # (N, 44) mask probabilities
    node_values: np.ndarray  # (N, 44)
    edge_indices: tuple  # (head position, dep position)
    edge_graph_ids: tuple  # (head graph id, dep graph id) after duplicate merge
    edge_mask: np.ndarray  # (E, 14)
    edge_values: np.ndarray  # (E, 14)


@dataclass
class TeacherForcing:
    """Tensors collected from one teacher-forced pass (loss assembly input)."""

    node_nll: list  # scalar tensors, one per node plus the end decision
    head_nll: list
    relation_nll: list
    attentions: list  # encoder attention vectors, one per step
    node_rows: list  # (position, mask_logits, value_tensor) for semantic nodes
    edge_rows: list  # ((head pos, dep pos), mask_logits, value_tensor)
    n_tokens: int


def _glorot(rng, shape):
    fan_in = shape[-1] if len(shape) > 1 else shape[0]
    fan_out = shape[0]
    if len(shape) == 3:  # bilinear: treat each slice as (d1, d2)
        fan_in, fan_out = shape[1], shape[2]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_array(shape, -limit, limit)


class Parser:
    def __init__(self, config, vocabs, params=None):
        self.config = config
        self.vocabs = vocabs
        self.params = params if params is not None else self._init_params()

    # ---------------------------------------------------------------- setup

    def _init_params(self):
        cfg = self.config
        rng = XorShiftRNG(cfg.seed)
        store = ad.ParameterStore()

        def emb(name, rows, dim):
            store.add(name, rng.uniform_array((rows, dim), -0.1, 0.1))

        def linear(name, out_dim, in_dim, bias=True):
            store.add(f"{name}_W", _glorot(rng, (out_dim, in_dim)))
            if bias:
                store.add(f"{name}_b", np.zeros(out_dim))

        def lstm(name, in_dim, hidden):
            store.add(f"{name}_W", _glorot(rng, (4 * hidden, in_dim)))
            store.add(f"{name}_U", _glorot(rng, (4 * hidden, hidden)))
            b = np.zeros(4 * hidden)
            b[hidden:2 * hidden] = 1.0  # forget-gate bias
            store.add(f"{name}_b", b)

        emb("src_tok_emb", self.vocabs["source"].size, cfg.token_dim)
        emb("src_pos_emb", self.vocabs["pos"].size, cfg.pos_dim)
        emb("src_char_emb", self.vocabs["chars"].size, cfg.char_dim)
        linear("src_char_cnn", cfg.char_filters, cfg.char_window * cfg.char_dim)

        enc_in = cfg.token_dim + cfg.pos_dim + cfg.char_filters + cfg.contextual_dim
        for layer in range(cfg.num_layers):
            in_dim = enc_in if layer == 0 else 2 * cfg.encoder_hidden
            lstm(f"enc{layer}_fwd", in_dim, cfg.encoder_hidden)
            lstm(f"enc{layer}_bwd", in_dim, cfg.encoder_hidden)

        emb("dec_tok_emb", self.vocabs["labels"].size, cfg.token_dim)
        emb("dec_char_emb", self.vocabs["chars"].size, cfg.char_dim)
        linear("dec_char_cnn", cfg.char_filters, cfg.char_window * cfg.char_dim)
        emb("index_emb", cfg.max_index, cfg.index_emb_dim)
        emb("relation_emb", len(RELATION_EMBEDDINGS), cfg.relation_emb_dim)

        width = 2 * cfg.encoder_hidden
        label_dim = cfg.token_dim + cfg.char_filters
        dec_in = label_dim + cfg.index_emb_dim
        for layer in range(cfg.num_layers):
            in_dim = dec_in if layer == 0 else width
            lstm(f"dec{layer}", in_dim, width)

        linear("att", cfg.attention_hidden, width + width)
        store.add("att_v", _glorot(rng, (cfg.attention_hidden,)))

        z_in = width + width + cfg.relation_emb_dim + label_dim + cfg.index_emb_dim
        linear("z1", cfg.relation_mlp_hidden, z_in)
        linear("z2", cfg.node_state_dim, cfg.relation_mlp_hidden)

        linear("switch", 3, cfg.node_state_dim)
        linear("vocab", self.vocabs["generation"].size, cfg.node_state_dim)
        store.add("dec_copy_w", _glorot(rng, (cfg.node_state_dim,)))

        linear("head_start", cfg.biaffine_dim, width)
        linear("head_end", cfg.biaffine_dim, width)
        store.add("head_U", _glorot(rng, (cfg.biaffine_dim, cfg.biaffine_dim)))
        store.add("head_w", _glorot(rng, (cfg.biaffine_dim,)))

        linear("rel_src", cfg.relation_bilinear_dim, width)
        linear("rel_tgt", cfg.relation_bilinear_dim, width)
        store.add("rel_A", _glorot(
            rng, (len(RELATIONS), cfg.relation_bilinear_dim, cfg.relation_bilinear_dim)
        ))
        store.add("rel_b", np.zeros(len(RELATIONS)))

        linear("node_mask1", cfg.attr_hidden, cfg.node_state_dim)
        linear("node_mask2", len(NODE_PROPERTIES), cfg.attr_hidden)
        store.add("edge_mask_A", _glorot(rng, (cfg.edge_bilinear_dim, width, width)))
        store.add("edge_mask_Ab", np.zeros(cfg.edge_bilinear_dim))
        linear("edge_mask_out", len(EDGE_PROPERTIES), cfg.edge_bilinear_dim)
        if not cfg.shared_attribute_heads:
            linear("node_attr1", cfg.attr_hidden, cfg.node_state_dim)
            linear("node_attr2", len(NODE_PROPERTIES), cfg.attr_hidden)
            store.add("edge_attr_A", _glorot(rng, (cfg.edge_bilinear_dim, width, width)))
            store.add("edge_attr_Ab", np.zeros(cfg.edge_bilinear_dim))
            linear("edge_attr_out", len(EDGE_PROPERTIES), cfg.edge_bilinear_dim)
        return store

    def _p(self, name):
        return self.params[name]

    # ------------------------------------------------------------- encoder

    def _char_cnn(self, text, emb_name, cnn_name):
        cfg = self.config
        vocab = self.vocabs["chars"]
        chars = list(text) if text else [CHAR_PAD]
        while len(chars) < cfg.char_window:
            chars.append(CHAR_PAD)
        rows = [ad.row(self._p(emb_name), vocab.id(ch)) for ch in chars]
        mat = ad.stack_rows(rows)
        conv = ad.tanh(ad.conv1d_rows(mat, self._p(f"{cnn_name}_W"), self._p(f"{cnn_name}_b")))
        return ad.mean_axis0(conv)

    def encode(self, tokens, pos_tags, contextual=None, train=False, dropout_rng=None):
        """Stacked bidirectional LSTM states for every token and layer."""
        cfg = self.config
        if not tokens:
            raise EmptyInputError("cannot encode an empty token list")
        if len(tokens) != len(pos_tags):
            raise MisalignedError("tokens and POS tags differ in length")
        if contextual is not None and cfg.contextual_dim:
            contextual = np.asarray(contextual, dtype=np.float64)
            if contextual.shape != (len(tokens), cfg.contextual_dim):
                raise MisalignedError(
                    f"contextual vectors shaped {contextual.shape}, "
                    f"want {(len(tokens), cfg.contextual_dim)}"
                )

        features = []
        for t, (form, pos) in enumerate(zip(tokens, pos_tags)):
            parts = [
                ad.row(self._p("src_tok_emb"), self.vocabs["source"].id(form)),
                ad.row(self._p("src_pos_emb"), self.vocabs["pos"].id(pos)),
                self._char_cnn(form, "src_char_emb", "src_char_cnn"),
            ]
            if cfg.contextual_dim:
                vec = contextual[t] if contextual is not None else np.zeros(cfg.contextual_dim)
                parts.append(ad.constant(vec))
            feat = ad.concat(parts)
            if train and cfg.dropout > 0:
                feat = ad.dropout(feat, cfg.dropout, dropout_rng)
            features.append(feat)

        layer_states = []
        inputs = features
        hidden = cfg.encoder_hidden
        for layer in range(cfg.num_layers):
            zeros = ad.constant(np.zeros(hidden))
            fwd, h, c = [], zeros, zeros
            for x in inputs:
                h, c = ad.lstm_step(x, h, c,
                                    self._p(f"enc{layer}_fwd_W"),
                                    self._p(f"enc{layer}_fwd_U"),
                                    self._p(f"enc{layer}_fwd_b"))
                fwd.append(h)
            bwd, h, c = [None] * len(inputs), zeros, zeros
            for t in range(len(inputs) - 1, -1, -1):
                h, c = ad.lstm_step(inputs[t], h, c,
                                    self._p(f"enc{layer}_bwd_W"),
                                    self._p(f"enc{layer}_bwd_U"),
                                    self._p(f"enc{layer}_bwd_b"))
                bwd[t] = h
            rows = [ad.concat([f, b]) for f, b in zip(fwd, bwd)]
            state = ad.stack_rows(rows)
            layer_states.append(state)
            inputs = rows
        return EncoderState(layer_states=tuple(layer_states), n_tokens=len(tokens))

    # ------------------------------------------------------------- decoder

    def init_decoder(self, enc):
        """Initial per-layer states [backward at token 1; forward at token n]."""
        hidden = self.config.encoder_hidden
        h, c = [], []
        for state in enc.layer_states:
            first = ad.row(state, 0)
            last = ad.row(state, enc.n_tokens - 1)
            h.append(ad.concat([ad.slice1d(first, hidden, 2 * hidden),
                                ad.slice1d(last, 0, hidden)]))
            c.append(ad.constant(np.zeros(2 * hidden)))
        return DecoderState(h=h, c=c, h_history=[h[-1]], encoder=enc)

    def _label_embedding(self, label, cache=None):
        if cache is not None and label in cache:
            return cache[label]
        vec = ad.concat([
            ad.row(self._p("dec_tok_emb"), self.vocabs["labels"].id(label)),
            self._char_cnn(label, "dec_char_emb", "dec_char_cnn"),
        ])
        if cache is not None:
            cache[label] = vec
        return vec

    def _index_embedding(self, index):
        return ad.row(self._p("index_emb"), min(index, self.config.max_index - 1))

    def advance(self, state, v_label, v_index, kind, anchor, cache=None):
        """Feed node v through the stacked decoder LSTM."""
        x = ad.concat([self._label_embedding(v_label, cache), self._index_embedding(v_index)])
        for layer in range(self.config.num_layers):
            h, c = ad.lstm_step(x, state.h[layer], state.c[layer],
                                self._p(f"dec{layer}_W"),
                                self._p(f"dec{layer}_U"),
                                self._p(f"dec{layer}_b"))
            state.h[layer] = h
            state.c[layer] = c
            x = h
        state.h_history.append(state.h[-1])
        state.kinds.append(kind)
        state.labels.append(v_label)
        state.anchors.append(anchor)
        return state

    def finish_step(self, state, relation_name, u_label, u_index, cache=None):
        """Attention, context, and the node state z for the current position."""
        enc_top = state.encoder.top
        n = state.encoder.n_tokens
        h_top = state.h[-1]
        att_in = ad.concat_cols(enc_top, ad.tile_rows(h_top, n))
        hidden = ad.tanh(ad.affine_rows(att_in, self._p("att_W"), self._p("att_b")))
        attention = ad.softmax(ad.matmul(hidden, self._p("att_v")))
        context = ad.matmul(attention, enc_top)
        rel_vec = ad.row(self._p("relation_emb"), RELATION_EMBEDDINGS.index(relation_name))
        z_in = ad.concat([
            h_top, context, rel_vec,
            self._label_embedding(u_label, cache),
            self._index_embedding(u_index),
        ])
        z = ad.affine(self._p("z2_W"),
                      ad.tanh(ad.affine(self._p("z1_W"), z_in, self._p("z1_b"))),
                      self._p("z2_b"))
        state.last_attention = attention
        state.z_history.append(z)
        return z

    def decoder_step(self, prev, state, enc):
        """Consume one relation tuple; returns (z, updated state).

        ``prev`` is the relation that introduced the current node: its
        label/index drive the recurrent update, its head and relation
        enter through the node-state MLP.
        """
        assert state.encoder is enc
        kind = _relation_kind(prev.r, state.kinds[prev.d_u])
        self.advance(state, prev.v, prev.d_v, kind, prev.anchor)
        z = self.finish_step(state, prev.r, prev.u, prev.d_u)
        return z, state

    # ------------------------------------------------------- distributions

    def next_node_distribution(self, z, enc_attention, state):
        """Mixture over (generation vocab | source copy | target copy).

        The target-copy region ranges over previously decoded *semantic*
        nodes; with no semantic history the switch renormalizes over the
        other two regions so the result still sums to one.
        """
        switch = ad.softmax(ad.affine(self._p("switch_W"), z, self._p("switch_b")))
        p_gen = ad.pick(switch, 0)
        p_enc = ad.pick(switch, 1)
        p_dec = ad.pick(switch, 2)
        vocab_probs = ad.softmax(ad.affine(self._p("vocab_W"), z, self._p("vocab_b")))
        sem_positions = [p for p in state.semantic_positions() if p >= 1]
        parts = [ad.mul(vocab_probs, p_gen), ad.mul(enc_attention, p_enc)]
        if sem_positions:
            z_mat = ad.stack_rows([state.z_history[p] for p in sem_positions])
            copy_probs = ad.softmax(ad.matmul(z_mat, self._p("dec_copy_w")))
            parts.append(ad.mul(copy_probs, p_dec))
            dist = ad.concat(parts)
        else:
            dist = ad.div(ad.concat(parts), ad.add(p_gen, p_enc))
        return dist, sem_positions

    def head_distribution(self, h_new, h_history):
        """Biaffine scores of the new node against every earlier node."""
        if not h_history:
            raise ValueError("head prediction needs at least the root state")
        start = ad.tanh(ad.affine(self._p("head_start_W"), h_new, self._p("head_start_b")))
        ends = ad.tanh(ad.affine_rows(ad.stack_rows(list(h_history)),
                                      self._p("head_end_W"), self._p("head_end_b")))
        scores = ad.add(ad.matmul(ends, ad.matmul(self._p("head_U"), start)),
                        ad.matmul(ends, self._p("head_w")))
        return ad.softmax(scores)

    def relation_distribution(self, h_head, h_new):
        src = ad.tanh(ad.affine(self._p("rel_src_W"), h_head, self._p("rel_src_b")))
        tgt = ad.tanh(ad.affine(self._p("rel_tgt_W"), h_new, self._p("rel_tgt_b")))
        return ad.softmax(ad.bilinear(src, tgt, self._p("rel_A"), self._p("rel_b")))

    # ----------------------------------------------------- attribute heads

    def _node_attr_logits(self, z):
        mask = ad.affine(
            self._p("node_mask2_W"),
            ad.tanh(ad.affine(self._p("node_mask1_W"), z, self._p("node_mask1_b"))),
            self._p("node_mask2_b"),
        )
        if self.config.shared_attribute_heads:
            return mask, mask
        values = ad.affine(
            self._p("node_attr2_W"),
            ad.tanh(ad.affine(self._p("node_attr1_W"), z, self._p("node_attr1_b"))),
            self._p("node_attr2_b"),
        )
        return mask, values

    def _edge_attr_logits(self, h_s, h_e):
        m_mask = ad.bilinear(h_s, h_e, self._p("edge_mask_A"), self._p("edge_mask_Ab"))
        mask = ad.affine(self._p("edge_mask_out_W"), m_mask, self._p("edge_mask_out_b"))
        if self.config.shared_attribute_heads:
            return mask, mask
        m_attr = ad.bilinear(h_s, h_e, self._p("edge_attr_A"), self._p("edge_attr_Ab"))
        values = ad.affine(self._p("edge_attr_out_W"), m_attr, self._p("edge_attr_out_b"))
        return mask, values

    def node_attributes(self, z):
        """Mask probabilities and raw values for one node state."""
        mask, values = self._node_attr_logits(z)
        return ad.sigmoid(mask), values

    def edge_attributes(self, h_s, h_e):
        """Mask probabilities and raw values for one argument edge."""
        mask, values = self._edge_attr_logits(h_s, h_e)
        return ad.sigmoid(mask), values

    # ------------------------------------------------------ teacher forcing

    def forward_teacher(self, tokens, pos_tags, relations, contextual=None,
                        train=False, dropout_rng=None):
        """Teacher-forced pass over a gold relation sequence."""
        n = len(tokens)
        for rel in relations:
            if rel.anchor is not None and not 0 <= rel.anchor < n:
                raise MisalignedError(
                    f"relation at {rel.d_v} anchored to token {rel.anchor} of {n}"
                )
        cache = {}
        enc = self.encode(tokens, pos_tags, contextual=contextual,
                          train=train, dropout_rng=dropout_rng)
        state = self.init_decoder(enc)
        z = self.finish_step(state, START_RELATION, ROOT_LABEL, 0, cache)

        out = TeacherForcing(node_nll=[], head_nll=[], relation_nll=[],
                             attentions=[state.last_attention],
                             node_rows=[], edge_rows=[], n_tokens=n)
        gen_vocab = self.vocabs["generation"]

        for rel in relations:
            dist, sem_positions = self.next_node_distribution(z, state.last_attention, state)
            target = self._gold_target_index(rel, sem_positions, gen_vocab, enc.n_tokens)
            out.node_nll.append(ad.neg(ad.log(ad.pick(dist, target))))

            kind = _relation_kind(rel.r, state.kinds[rel.d_u])
            self.advance(state, rel.v, rel.d_v, kind, rel.anchor, cache)
            h_new = state.h_history[rel.d_v]

            head_dist = self.head_distribution(h_new, state.h_history[:rel.d_v])
            out.head_nll.append(ad.neg(ad.log(ad.pick(head_dist, rel.d_u))))

            rel_dist = self.relation_distribution(state.h_history[rel.d_u], h_new)
            out.relation_nll.append(
                ad.neg(ad.log(ad.pick(rel_dist, RELATIONS.index(rel.r))))
            )

            z = self.finish_step(state, rel.r, rel.u, rel.d_u, cache)
            out.attentions.append(state.last_attention)

            if kind in SEMANTIC_KINDS:
                mask_logits, values = self._node_attr_logits(z)
                out.node_rows.append((rel.d_v, mask_logits, values))
            if rel.r == RELATION_ARGUMENT and state.kinds[rel.d_u] in SEMANTIC_KINDS:
                mask_logits, values = self._edge_attr_logits(
                    state.h_history[rel.d_u], h_new
                )
                out.edge_rows.append(((rel.d_u, rel.d_v), mask_logits, values))

        # the end-of-graph decision is one more vocabulary choice
        dist, _ = self.next_node_distribution(z, state.last_attention, state)
        out.node_nll.append(ad.neg(ad.log(ad.pick(dist, gen_vocab.id(END_TOKEN)))))
        return out

    def _gold_target_index(self, rel, sem_positions, gen_vocab, n_tokens):
        if rel.target_copy is not None:
            if rel.target_copy not in sem_positions:
                raise MisalignedError(
                    f"target copy of {rel.target_copy} is not a decoded semantic node"
                )
            return gen_vocab.size + n_tokens + sem_positions.index(rel.target_copy)
        if rel.anchor is not None:
            return gen_vocab.size + rel.anchor
        if rel.v not in gen_vocab:
            raise MisalignedError(f"label {rel.v!r} is not generable")
        return gen_vocab.id(rel.v)

    # -------------------------------------------------------- forced decode

    def forced_decode(self, tokens, pos_tags, gold, contextual=None):
        """Attribute predictions over a gold arborescence's structure."""
        relations = linearize(gold)
        out = self.forward_teacher(tokens, pos_tags, relations, contextual=contextual)
        return self._collect_attributes(gold, out)

    def _collect_attributes(self, gold, out):
        graph_ids = _arbor_graph_ids(gold)
        node_indices, node_ids, node_mask, node_values = [], [], [], []
        for pos, mask_logits, values in out.node_rows:
            node_indices.append(pos)
            node_ids.append(None if pos in gold.copy_of else graph_ids.get(pos))
            node_mask.append(_sigmoid(mask_logits.data))
            node_values.append(values.data.copy())
        edge_indices, edge_ids, edge_mask, edge_values = [], [], [], []
        for (s, e), mask_logits, values in out.edge_rows:
            edge_indices.append((s, e))
            edge_ids.append((graph_ids.get(s), graph_ids.get(e)))
            edge_mask.append(_sigmoid(mask_logits.data))
            edge_values.append(values.data.copy())
        k_node, k_edge = len(NODE_PROPERTIES), len(EDGE_PROPERTIES)
        return AttributePrediction(
            node_indices=tuple(node_indices),
            node_graph_ids=tuple(node_ids),
            node_mask=np.array(node_mask).reshape(-1, k_node),
            node_values=np.array(node_values).reshape(-1, k_node),
            edge_indices=tuple(edge_indices),
            edge_graph_ids=tuple(edge_ids),
            edge_mask=np.array(edge_mask).reshape(-1, k_edge),
            edge_values=np.array(edge_values).reshape(-1, k_edge),
        )

    # ---------------------------------------------------------- free decode

    def parse(self, tokens, pos_tags, contextual=None):
        """Autoregressive decode into a predicted graph."""
        if self.config.beam_size > 1:
            relations = self._beam_decode(tokens, pos_tags, contextual)
        else:
            relations = self._greedy_decode(tokens, pos_tags, contextual)
        arbor = delinearize(relations, sentence_id="", tokens=tuple(
            _as_token(t, p) for t, p in zip(tokens, pos_tags)
        ))
        return to_graph(arbor, predicted=True)

    def _greedy_decode(self, tokens, pos_tags, contextual=None):
        cache = {}
        enc = self.encode(tokens, pos_tags, contextual=contextual)
        state = self.init_decoder(enc)
        z = self.finish_step(state, START_RELATION, ROOT_LABEL, 0, cache)
        relations = []
        max_steps = 4 * len(tokens)
        while True:
            if len(relations) >= max_steps:
                raise DecodeOverflowError(
                    f"decode exceeded {max_steps} steps for {len(tokens)} tokens"
                )
            dist, sem_positions = self.next_node_distribution(z, state.last_attention, state)
            choice = int(np.argmax(dist.data))
            resolved = self._resolve_choice(choice, sem_positions, state, tokens)
            if resolved is None:
                break
            label, anchor, target_copy = resolved
            rel, z = self._attach_node(
                state, label, anchor, target_copy, cache
            )
            relations.append(rel)
        return relations

    def _resolve_choice(self, choice, sem_positions, state, tokens):
        gen_vocab = self.vocabs["generation"]
        if choice < gen_vocab.size:
            label = gen_vocab.tokens[choice]
            if label == END_TOKEN:
                return None
            return label, None, None
        choice -= gen_vocab.size
        if choice < len(tokens):
            return tokens[choice], choice, None
        antecedent = sem_positions[choice - len(tokens)]
        return state.labels[antecedent], state.anchors[antecedent], antecedent

    def _attach_node(self, state, label, anchor, target_copy, cache):
        """Advance, then pick head/relation under decode-time constraints."""
        position = state.step + 1
        self.advance(state, label, position, "pending", anchor, cache)
        h_new = state.h_history[position]

        candidates = [
            p for p in range(position)
            if state.kinds[p] == KIND_ROOT or state.kinds[p] in SEMANTIC_KINDS
        ]
        head_dist = self.head_distribution(
            h_new, [state.h_history[p] for p in candidates]
        )
        head = candidates[int(np.argmax(head_dist.data))]

        if head == 0:
            relation = RELATION_ROOT
        elif target_copy is not None:
            relation = RELATION_ARGUMENT
        else:
            rel_dist = self.relation_distribution(state.h_history[head], h_new)
            allowed = (RELATION_ARGUMENT, RELATION_NONHEAD)
            relation = max(
                allowed, key=lambda r: rel_dist.data[RELATIONS.index(r)]
            )
        kind = _relation_kind(relation, state.kinds[head])
        state.kinds[position] = kind

        z = self.finish_step(state, relation, state.labels[head], head, cache)

        node_attrs = {}
        if kind in SEMANTIC_KINDS and target_copy is None:
            mask, values = self.node_attributes(z)
            for j, prop in enumerate(NODE_PROPERTIES):
                if mask.data[j] > self.config.mask_threshold:
                    node_attrs[prop] = AttributeRecord(
                        value=float(np.clip(values.data[j], VALUE_MIN, VALUE_MAX)),
                        confidence=float(mask.data[j]),
                    )
        edge_attrs = {}
        if relation == RELATION_ARGUMENT and state.kinds[head] in SEMANTIC_KINDS:
            mask, values = self.edge_attributes(state.h_history[head], h_new)
            for j, prop in enumerate(EDGE_PROPERTIES):
                if mask.data[j] > self.config.mask_threshold:
                    edge_attrs[prop] = AttributeRecord(
                        value=float(np.clip(values.data[j], VALUE_MIN, VALUE_MAX)),
                        confidence=float(mask.data[j]),
                    )
        rel = SemanticRelation(
            u=state.labels[head], d_u=head, r=relation, v=label, d_v=position,
            target_copy=target_copy, anchor=anchor,
            node_attributes=node_attrs, edge_attributes=edge_attrs,
        )
        return rel, z

    def _beam_decode(self, tokens, pos_tags, contextual=None):
        """Beam over node choices; heads and relations stay greedy per path."""
        cache = {}
        enc = self.encode(tokens, pos_tags, contextual=contextual)
        state = self.init_decoder(enc)
        z = self.finish_step(state, START_RELATION, ROOT_LABEL, 0, cache)
        beams = [(0.0, state, z, [])]
        finished = []
        max_steps = 4 * len(tokens)
        for _ in range(max_steps):
            expansions = []
            for logp, state, z, relations in beams:
                dist, sem_positions = self.next_node_distribution(
                    z, state.last_attention, state
                )
                order = np.argsort(-dist.data)[: self.config.beam_size]
                for choice in order:
                    step_logp = float(np.log(max(dist.data[choice], 1e-300)))
                    resolved = self._resolve_choice(
                        int(choice), sem_positions, state, tokens
                    )
                    if resolved is None:
                        finished.append((logp + step_logp, relations))
                        continue
                    label, anchor, target_copy = resolved
                    branch = state.clone()
                    rel, z_new = self._attach_node(
                        branch, label, anchor, target_copy, cache
                    )
                    expansions.append(
                        (logp + step_logp, branch, z_new, relations + [rel])
                    )
            if not expansions:
                break
            expansions.sort(key=lambda item: -item[0])
            beams = expansions[: self.config.beam_size]
        if not finished:
            if not beams:
                raise DecodeOverflowError("beam search produced no finished parse")
            finished = [(logp, relations) for logp, _, _, relations in beams]
        finished.sort(key=lambda item: -item[0])
        return finished[0][1]

    # ------------------------------------------------------------- persist

    def save(self, path):
        meta = {
            "config": asdict(self.config),
            "vocabs": {name: v.to_json() for name, v in self.vocabs.items()},
        }
        save_checkpoint(path, self.params.state_dict(), meta)

    @classmethod
    def load(cls, path):
        arrays, meta = load_checkpoint(path)
        config = ModelConfig(**meta["config"])
        vocabs = {
            name: Vocabulary.from_json(obj) for name, obj in meta["vocabs"].items()
        }
        parser = cls(config, vocabs)
        parser.params.load_state_dict(arrays)
        return parser


def prediction_to_graph(gold_arbor, prediction, mask_threshold=None):
    """Gold structure with predicted attributes attached.

    With ``mask_threshold`` None every property is attached (mask
    probability stored as the confidence), which is what the correlational
    analysis consumes; with a threshold only fired attributes remain.
    """
    node_attr = {}
    for row, pos in enumerate(prediction.node_indices):
        attrs = {}
        for j, prop in enumerate(NODE_PROPERTIES):
            prob = prediction.node_mask[row, j]
            if mask_threshold is not None and prob <= mask_threshold:
                continue
            attrs[prop] = AttributeRecord(
                value=float(np.clip(prediction.node_values[row, j], VALUE_MIN, VALUE_MAX)),
                confidence=float(prob),
            )
        node_attr[pos] = attrs
    edge_attr = {}
    for row, pair in enumerate(prediction.edge_indices):
        attrs = {}
        for j, prop in enumerate(EDGE_PROPERTIES):
            prob = prediction.edge_mask[row, j]
            if mask_threshold is not None and prob <= mask_threshold:
                continue
            attrs[prop] = AttributeRecord(
                value=float(np.clip(prediction.edge_values[row, j], VALUE_MIN, VALUE_MAX)),
                confidence=float(prob),
            )
        edge_attr[pair] = attrs

    nodes = []
    for pos, node in enumerate(gold_arbor.nodes):
        if pos in node_attr:
            nodes.append(replace(node, attributes=node_attr[pos]))
        else:
            nodes.append(replace(node, attributes={}))
    edges = []
    for edge in gold_arbor.edges:
        edges.append(replace(edge, attributes=edge_attr.get((edge.head, edge.dep), {})))
    arbor = replace(gold_arbor, nodes=tuple(nodes), edges=tuple(edges))
    return to_graph(arbor, predicted=True)


def _arbor_graph_ids(arbor):
    """Arborescence position -> canonical graph node id (duplicates merged)."""
    graph = to_graph(arbor)
    by_id = {n.node_id for n in graph.semantics_nodes}
    from .arborescence import canonical_node_id

    used = set()
    mapping = {}
    for pos, node in enumerate(arbor.nodes):
        if node.kind not in SEMANTIC_KINDS or pos in arbor.copy_of:
            continue
        mapping[pos] = canonical_node_id(node.kind, node.token_index, used)
    for dup, antecedent in arbor.copy_of.items():
        mapping[dup] = mapping[antecedent]
    assert set(mapping.values()) <= by_id or not by_id
    return mapping


def _relation_kind(relation, head_kind):
    if relation == RELATION_NONHEAD:
        return KIND_SYNTAX
    if relation == RELATION_ROOT:
        return KIND_PREDICATE
    return KIND_PREDICATE if head_kind == KIND_ARGUMENT else KIND_ARGUMENT


def _sigmoid(x):
    with np.errstate(over="ignore"):
        return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)),
                        np.exp(x) / (1.0 + np.exp(x)))


def _as_token(form, pos):
    from .graph import Token

    return Token(form=form, pos=pos)
