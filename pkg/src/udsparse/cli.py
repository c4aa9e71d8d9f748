"""Command-line surface.

Subcommands: convert, generate, train, predict, forced-decode, eval-s,
analyze, baseline, tune-thresholds, gradcheck.  Exit codes: 0 success,
1 usage error, 2 data error.

Training reads an optional key-value config file: one ``key = value`` per
line, ``#`` comments, keys prefixed ``model.`` or ``training.`` and named
after the ModelConfig / TrainingConfig fields, e.g.::

    model.encoder_hidden = 32
    training.learning_rate = 0.001
    training.mode = binary

Command-line flags override config-file values.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import fields, replace

import numpy as np

from . import io as gio
from .analysis import (
    align_matrices,
    binarized_f1,
    edge_attribute_matrix,
    median_baseline,
    node_attribute_matrix,
    pearson_per_attribute,
    psi_matrix,
    tune_thresholds,
)
from .arborescence import build_arborescence, delinearize, linearize, to_graph
from .graph import AttributeRecord, strip_performative_nodes, validate_graph
from .model import DecodeOverflowError, MisalignedError, ModelConfig, Parser, build_vocabularies
from .smetric import IdMismatchError, corpus_eval
from .synthetic import (
    Corpus,
    CorpusValidationError,
    ParseError,
    SyntheticGrammarConfig,
    generate_synthetic,
    load_corpus,
    save_corpus,
)
from .training import TrainingConfig, train
from .graph import UDSGraph


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class DataError(Exception):
    pass


def parse_config_file(path):
    """Flat key = value file split into model/training overrides."""
    model_kw, training_kw = {}, {}
    model_fields = {f.name for f in fields(ModelConfig)}
    training_fields = {f.name for f in fields(TrainingConfig)}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            value = _coerce(raw)
            if key.startswith("model."):
                name = key[len("model."):]
                if name not in model_fields:
                    raise DataError(f"{path}:{lineno}: unknown model field {name!r}")
                model_kw[name] = value
            elif key.startswith("training."):
                name = key[len("training."):]
                if name not in training_fields:
                    raise DataError(f"{path}:{lineno}: unknown training field {name!r}")
                training_kw[name] = value
            else:
                raise DataError(
                    f"{path}:{lineno}: keys must start with 'model.' or 'training.'"
                )
    return model_kw, training_kw


def _coerce(raw):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _check_format_version(requested):
    if requested is None:
        return
    major = str(requested).split(".")[0]
    if major != gio.FORMAT_VERSION.split(".")[0]:
        raise DataError(
            f"unsupported format version {requested!r}; this build speaks {gio.FORMAT_VERSION}"
        )


def _load_graphs(path, split=None, validate=True):
    corpus = load_corpus(path, split=split, validate=validate)
    return corpus


def _canonical_gold(graphs):
    """Gold graphs rebuilt through the tree form so node ids are canonical."""
    out = []
    for g in graphs:
        if g.predicted:
            out.append(g)
        else:
            out.append(to_graph(build_arborescence(strip_performative_nodes(g))))
    return out


# --------------------------------------------------------------- subcommands

def cmd_generate(args):
    cfg_kwargs = dict(sentence_count=args.count, seed=args.seed)
    if args.mix:
        cfg_kwargs["construction_mix"] = tuple(float(x) for x in args.mix.split(","))
    if args.density is not None:
        cfg_kwargs["annotation_density"] = args.density
    if args.splits:
        cfg_kwargs["split_fractions"] = tuple(float(x) for x in args.splits.split(","))
    corpus = generate_synthetic(SyntheticGrammarConfig(**cfg_kwargs))
    save_corpus(args.out, corpus)
    print(f"wrote {len(corpus)} graphs to {args.out}")
    return 0


def cmd_convert(args):
    records_out = []
    if args.source == "graph":
        corpus = _load_graphs(args.input)
        for graph, split in zip(corpus.graphs, corpus.splits):
            arbor = build_arborescence(strip_performative_nodes(graph))
            if args.to == "arborescence":
                records_out.append(gio.arborescence_to_dict(arbor))
            elif args.to == "relations":
                records_out.append(gio.relations_to_dict(arbor, linearize(arbor)))
            else:
                records_out.append(gio.graph_to_dict(to_graph(arbor), split=split))
    elif args.source == "arborescence":
        for record in gio.read_jsonl(args.input):
            arbor = gio.arborescence_from_dict(record)
            if args.to == "graph":
                records_out.append(gio.graph_to_dict(to_graph(arbor)))
            elif args.to == "relations":
                records_out.append(gio.relations_to_dict(arbor, linearize(arbor)))
            else:
                records_out.append(gio.arborescence_to_dict(arbor))
    else:  # relations
        for record in gio.read_jsonl(args.input):
            sentence_id, tokens, relations = gio.relations_from_dict(record)
            arbor = delinearize(relations, sentence_id=sentence_id, tokens=tokens)
            if args.to == "graph":
                records_out.append(gio.graph_to_dict(to_graph(arbor)))
            elif args.to == "arborescence":
                records_out.append(gio.arborescence_to_dict(arbor))
            else:
                records_out.append(gio.relations_to_dict(arbor, relations))
    gio.write_jsonl(args.out, records_out)
    print(f"wrote {len(records_out)} records to {args.out}")
    return 0


def _configs_from_args(args):
    model_kw, training_kw = {}, {}
    if args.config:
        model_kw, training_kw = parse_config_file(args.config)
    if args.seed is not None:
        model_kw.setdefault("seed", args.seed)
        training_kw.setdefault("seed", args.seed)
    for name, value in (("epochs", args.epochs), ("learning_rate", args.lr),
                        ("batch_size", args.batch_size), ("gamma", args.gamma),
                        ("mode", args.mode), ("coverage_weight", args.coverage_weight),
                        ("early_stop_loss", args.early_stop)):
        if value is not None:
            training_kw[name] = value
    if args.shared_attribute_heads:
        model_kw["shared_attribute_heads"] = True
    return ModelConfig(**model_kw), TrainingConfig(**training_kw)


def cmd_train(args):
    model_cfg, train_cfg = _configs_from_args(args)
    corpus = _load_graphs(args.corpus)
    train_graphs = [strip_performative_nodes(g) for g in corpus.subset("train")]
    dev_graphs = [strip_performative_nodes(g) for g in corpus.subset("dev")]
    if not train_graphs:
        raise DataError(f"{args.corpus} has no train-split graphs")
    result = train(train_graphs, model_cfg, train_cfg, dev_graphs=dev_graphs or None)
    result.parser.save(args.out)
    if args.loss_log:
        _write_loss_log(args.loss_log, result.log)
    status = "aborted (non-finite loss); last good checkpoint saved" if result.aborted \
        else f"finished {len(result.log)} epochs"
    final = result.log[-1]["total"] if result.log else float("nan")
    print(f"{status}; final train loss {final:.4f}; checkpoint at {args.out}")
    return 0


def _write_loss_log(path, log):
    fields_ = ["epoch", "node_xent", "head_xent", "relation_xent", "coverage",
               "mask_bce", "attr_combined", "total", "dev_total"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields_, extrasaction="ignore")
        writer.writeheader()
        for entry in log:
            writer.writerow(entry)


def cmd_predict(args):
    parser = Parser.load(args.model)
    if args.beam is not None:
        parser = Parser(replace(parser.config, beam_size=args.beam),
                        parser.vocabs, params=parser.params)
    if args.mask_threshold is not None:
        parser = Parser(replace(parser.config, mask_threshold=args.mask_threshold),
                        parser.vocabs, params=parser.params)
    corpus = _load_graphs(args.input, split=args.split)
    records = []
    overflowed = 0
    for graph in corpus.graphs:
        tokens = [t.form for t in graph.tokens]
        pos = [t.pos for t in graph.tokens]
        try:
            pred = parser.parse(tokens, pos)
            pred = replace(pred, sentence_id=graph.sentence_id)
        except DecodeOverflowError:
            overflowed += 1
            pred = UDSGraph(sentence_id=graph.sentence_id, tokens=graph.tokens,
                            predicted=True)
        records.append(gio.graph_to_dict(pred))
    gio.write_jsonl(args.out, records)
    note = f" ({overflowed} degenerate decodes emitted empty graphs)" if overflowed else ""
    print(f"wrote {len(records)} predictions to {args.out}{note}")
    return 0


def cmd_forced_decode(args):
    from .model import prediction_to_graph

    parser = Parser.load(args.model)
    corpus = _load_graphs(args.input, split=args.split)
    threshold = parser.config.mask_threshold if args.apply_mask else None
    records = []
    for graph in corpus.graphs:
        stripped = strip_performative_nodes(graph)
        arbor = build_arborescence(stripped)
        tokens = [t.form for t in stripped.tokens]
        pos = [t.pos for t in stripped.tokens]
        prediction = parser.forced_decode(tokens, pos, arbor)
        pred_graph = prediction_to_graph(arbor, prediction, mask_threshold=threshold)
        records.append(gio.graph_to_dict(pred_graph))
    gio.write_jsonl(args.out, records)
    print(f"wrote {len(records)} forced decodes to {args.out}")
    return 0


def cmd_eval_s(args):
    pred = _load_graphs(args.pred, validate=False)
    gold = _load_graphs(args.gold, validate=False)
    result = corpus_eval(
        pred.graphs, _canonical_gold(gold.graphs),
        semantics_only=args.semantics_only,
        include_attributes=args.attributes,
        restarts=args.restarts, seed=args.seed or 0, threads=args.threads,
    )
    if args.out_csv:
        with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sentence_id", "precision", "recall", "f1",
                             "matched", "pred_triples", "gold_triples"])
            for sid in sorted(result.per_sentence):
                r = result.per_sentence[sid]
                writer.writerow([sid, f"{r.precision:.6f}", f"{r.recall:.6f}",
                                 f"{r.f1:.6f}", f"{r.matched_total:.4f}",
                                 r.pred_triples, r.gold_triples])
    summary = {"precision": result.precision, "recall": result.recall,
               "f1": result.f1, "sentences": len(result.per_sentence),
               "semantics_only": args.semantics_only, "attributes": args.attributes,
               "restarts": args.restarts}
    if args.out_json:
        with open(args.out_json, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    print(f"P={result.precision:.4f} R={result.recall:.4f} F1={result.f1:.4f} "
          f"over {len(result.per_sentence)} sentences")
    return 0


def _matrices(pred_graphs, gold_graphs):
    gold_graphs = _canonical_gold(gold_graphs)
    node_pred, node_gold = align_matrices(
        node_attribute_matrix(pred_graphs), node_attribute_matrix(gold_graphs)
    )
    edge_pred, edge_gold = align_matrices(
        edge_attribute_matrix(pred_graphs), edge_attribute_matrix(gold_graphs)
    )
    return (node_pred, node_gold), (edge_pred, edge_gold)


def cmd_tune_thresholds(args):
    pred = _load_graphs(args.pred, validate=False)
    gold = _load_graphs(args.gold, validate=False)
    (node_pred, node_gold), (edge_pred, edge_gold) = _matrices(pred.graphs, gold.graphs)
    thresholds = tune_thresholds(node_pred, node_gold)
    thresholds.update(tune_thresholds(edge_pred, edge_gold))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(thresholds, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(thresholds)} thresholds to {args.out}")
    return 0


def cmd_analyze(args):
    pred = _load_graphs(args.pred, validate=False)
    gold = _load_graphs(args.gold, validate=False)
    (node_pred, node_gold), (edge_pred, edge_gold) = _matrices(pred.graphs, gold.graphs)

    if args.dev_pred and args.dev_gold:
        dev_pred = _load_graphs(args.dev_pred, validate=False)
        dev_gold = _load_graphs(args.dev_gold, validate=False)
        (dnp, dng), (dep, deg) = _matrices(dev_pred.graphs, dev_gold.graphs)
        thresholds = tune_thresholds(dnp, dng)
        thresholds.update(tune_thresholds(dep, deg))
    else:
        thresholds = tune_thresholds(node_pred, node_gold)
        thresholds.update(tune_thresholds(edge_pred, edge_gold))

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "thresholds.json"), "w", encoding="utf-8") as fh:
        json.dump(thresholds, fh, indent=2, sort_keys=True)
        fh.write("\n")

    rows = []
    macro_rhos = []
    for level, (p_m, g_m) in (("node", (node_pred, node_gold)),
                              ("edge", (edge_pred, edge_gold))):
        pearson = pearson_per_attribute(p_m, g_m)
        report = binarized_f1(p_m, g_m, thresholds)
        for prop in g_m.properties:
            rho = pearson[prop]
            precision, recall, f1, n = report.per_property[prop]
            if rho.rho is not None:
                macro_rhos.append(rho.rho)
            rows.append({
                "level": level, "property": prop,
                "pearson_rho": "" if rho.rho is None else f"{rho.rho:.6f}",
                "pearson_p": "" if rho.p_value is None else f"{rho.p_value:.6g}",
                "n": rho.n, "threshold": f"{thresholds.get(prop, 0.0):.2f}",
                "precision": f"{precision:.6f}", "recall": f"{recall:.6f}",
                "f1": f"{f1:.6f}",
            })
    with open(os.path.join(args.out, "attributes.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    for name, (p_m, g_m) in (("node", (node_pred, node_gold)),
                             ("edge", (edge_pred, edge_gold))):
        if p_m.values.shape[0] == 0:
            continue
        report = psi_matrix(p_m, g_m, replicants=args.replicants,
                            alpha=args.alpha, seed=args.seed or 0)
        _write_matrix_csv(os.path.join(args.out, f"psi_{name}.csv"),
                          report.properties, report.psi, "%.6f")
        _write_matrix_csv(os.path.join(args.out, f"psi_{name}_significant.csv"),
                          report.properties, report.significant.astype(int), "%d")

    defined = [float(r["pearson_rho"]) for r in rows if r["pearson_rho"]]
    macro = float(np.mean(defined)) if defined else float("nan")
    print(f"wrote analysis to {args.out} (macro Pearson over defined: {macro:.4f})")
    return 0


def _write_matrix_csv(path, properties, matrix, fmt):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["property"] + list(properties))
        for prop, row in zip(properties, matrix):
            writer.writerow([prop] + [fmt % v for v in row])


def cmd_baseline(args):
    train_corpus = _load_graphs(args.train, split="train")
    gold_nodes = node_attribute_matrix(_canonical_gold(train_corpus.graphs))
    gold_edges = edge_attribute_matrix(_canonical_gold(train_corpus.graphs))
    node_base = median_baseline(gold_nodes)
    edge_base = median_baseline(gold_edges)

    inputs = _load_graphs(args.input, split=args.split)
    records = []
    for graph in inputs.graphs:
        arbor = build_arborescence(strip_performative_nodes(graph))
        nodes = []
        for node in arbor.nodes:
            attrs = {
                prop: AttributeRecord(node_base.medians[prop], 1.0)
                for prop in node.attributes
                if prop in node_base.medians
            }
            nodes.append(replace(node, attributes=attrs))
        edges = []
        for edge in arbor.edges:
            attrs = {
                prop: AttributeRecord(edge_base.medians[prop], 1.0)
                for prop in edge.attributes
                if prop in edge_base.medians
            }
            edges.append(replace(edge, attributes=attrs))
        pred = to_graph(replace(arbor, nodes=tuple(nodes), edges=tuple(edges)),
                        predicted=True)
        records.append(gio.graph_to_dict(pred))
    gio.write_jsonl(args.out, records)
    print(f"wrote {len(records)} baseline predictions to {args.out}")
    return 0


def cmd_gradcheck(args):
    import udsparse.autodiff as ad
    from .arborescence import build_arborescence as build_arbor
    from .rng import XorShiftRNG
    from .training import TrainingConfig as TC
    from .training import sentence_loss

    seed = args.seed if args.seed is not None else 0
    corpus = generate_synthetic(SyntheticGrammarConfig(sentence_count=2, seed=seed))
    cfg = ModelConfig(token_dim=8, pos_dim=4, char_dim=4, char_filters=4,
                      encoder_hidden=8, num_layers=1, attention_hidden=8,
                      relation_mlp_hidden=8, node_state_dim=8, index_emb_dim=4,
                      relation_emb_dim=4, biaffine_dim=8, relation_bilinear_dim=8,
                      edge_bilinear_dim=8, attr_hidden=8, max_index=16, seed=seed)
    parser = Parser(cfg, build_vocabularies(corpus.graphs, cfg))
    arbors = [build_arbor(g) for g in corpus.graphs]
    checks = _component_checks(parser, arbors, args.max_coords, seed)
    worst = 0.0
    for name, err in checks:
        print(f"{name:<24} max rel error {err:.3e}")
        worst = max(worst, err)
    ok = worst < 1e-3
    print(f"overall worst {worst:.3e} -> {'PASS' if ok else 'FAIL'} (tolerance 1e-3)")
    return 0 if ok else 2


def _component_checks(parser, arbors, max_coords, seed):
    import udsparse.autodiff as ad
    from .model import ROOT_LABEL, START_RELATION
    from .training import TrainingConfig as TC
    from .training import sentence_loss, structural_loss

    tc = TC()
    arbor = arbors[0]
    tokens = [t.form for t in arbor.tokens]
    pos = [t.pos for t in arbor.tokens]
    limit = max_coords or 60
    checks = []

    def check(name, build):
        err = ad.gradient_check(build, parser.params, eps=1e-6,
                                max_coordinates=limit, seed=seed)
        checks.append((name, err))

    check("encoder", lambda: ad.sum_all(parser.encode(tokens, pos).top))

    def decoder_build():
        enc = parser.encode(tokens, pos)
        state = parser.init_decoder(enc)
        z = parser.finish_step(state, START_RELATION, ROOT_LABEL, 0)
        return ad.sum_all(z)

    check("decoder step", decoder_build)

    def pointer_build():
        enc = parser.encode(tokens, pos)
        state = parser.init_decoder(enc)
        z = parser.finish_step(state, START_RELATION, ROOT_LABEL, 0)
        dist, _ = parser.next_node_distribution(z, state.last_attention, state)
        return ad.neg(ad.log(ad.pick(dist, 0)))

    check("pointer generator", pointer_build)

    def heads_build():
        enc = parser.encode(tokens, pos)
        state = parser.init_decoder(enc)
        parser.finish_step(state, START_RELATION, ROOT_LABEL, 0)
        parser.advance(state, tokens[0], 1, "semantic-predicate", 0)
        h = state.h_history[1]
        head = parser.head_distribution(h, state.h_history[:1])
        rel = parser.relation_distribution(state.h_history[0], h)
        alpha, nu = parser.node_attributes(parser.finish_step(
            state, "root", ROOT_LABEL, 0))
        beta, lam = parser.edge_attributes(state.h_history[0], h)
        return ad.add(
            ad.add(ad.neg(ad.log(ad.pick(head, 0))), ad.neg(ad.log(ad.pick(rel, 0)))),
            ad.add(ad.sum_all(ad.add(alpha, nu)), ad.sum_all(ad.add(beta, lam))),
        )

    check("head/relation/attrs", heads_build)

    def full_build():
        totals = [sentence_loss(parser, a, tc)[0] for a in arbors]
        out = totals[0]
        for t in totals[1:]:
            out = ad.add(out, t)
        return ad.mul(out, ad.constant(1.0 / len(totals)))

    check("full loss", full_build)
    return checks


# --------------------------------------------------------------------- main

def build_arg_parser():
    parser = ArgumentParser(prog="udsparse",
                            description="semantic graph transduction toolkit")
    parser.add_argument("--seed", type=int, default=None, help="global seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for corpus scoring")
    parser.add_argument("--format-version", default=None,
                        help="required interchange format version")
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering values given before it
    common = ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--format-version", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("generate", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--mix", default=None,
                   help="fractions: simple,multiword,embedding,control")
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--splits", default=None, help="fractions: train,dev,test")
    p.set_defaults(func=cmd_generate)

    p = add_parser("convert", help="convert between graph forms")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--from", dest="source", default="graph",
                   choices=["graph", "arborescence", "relations"])
    p.add_argument("--to", required=True,
                   choices=["graph", "arborescence", "relations"])
    p.set_defaults(func=cmd_convert)

    p = add_parser("train", help="train the parser")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--mode", choices=["confidence", "binary"], default=None)
    p.add_argument("--coverage-weight", type=float, default=None)
    p.add_argument("--early-stop", type=float, default=None)
    p.add_argument("--shared-attribute-heads", action="store_true")
    p.add_argument("--loss-log", default=None, help="CSV loss log path")
    p.set_defaults(func=cmd_train)

    p = add_parser("predict", help="parse sentences with a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--mask-threshold", type=float, default=None)
    p.set_defaults(func=cmd_predict)

    p = add_parser("forced-decode",
                       help="predict attributes over gold structures")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--apply-mask", action="store_true",
                   help="attach only mask-fired attributes")
    p.set_defaults(func=cmd_forced_decode)

    p = add_parser("eval-s", help="match predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--semantics-only", action="store_true")
    p.add_argument("--attributes", action="store_true")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=cmd_eval_s)

    p = add_parser("analyze", help="attribute correlation analysis")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dev-pred", default=None)
    p.add_argument("--dev-gold", default=None)
    p.add_argument("--replicants", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_analyze)

    p = add_parser("baseline", help="median-value attribute baseline")
    p.add_argument("--train", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.set_defaults(func=cmd_baseline)

    p = add_parser("tune-thresholds", help="tune binarization thresholds")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune_thresholds)

    p = add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--max-coords", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)

    return parser


DATA_ERRORS = (
    DataError, ParseError, CorpusValidationError, gio.FormatError,
    IdMismatchError, MisalignedError, FileNotFoundError,
)


def main(argv=None):
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "command", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        _check_format_version(args.format_version)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
