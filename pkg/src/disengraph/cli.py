"""Command-line interface.

Subcommands:
    train        fit a model and write run artifacts to an output directory
    eval         run one evaluation protocol from a saved checkpoint
    ablate       train every ablation variant over shared seeds
    refine-eval  score initial / k-NN / refined adjacencies by label propagation

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, TrainConfig, format_config, load_config, parse_config
from .evalkit import (
    classification_metrics,
    cluster_and_score,
    component_confusion,
    export_similarity_matrix,
    label_propagation_score,
    mean_offdiagonal,
)
from .graph import DataError, load_dataset, save_edges, Adjacency
from .numerics import NumericError
from .plots import (
    plot_ablation_bars,
    plot_graph_scores,
    plot_matrix_heatmap,
    plot_training_curves,
)
from .refine import knn_graph
from .trainer import (
    ablation_matrix,
    build_model,
    eval_states,
    evaluate_logits,
    make_streams,
    train,
)

DATASET_FILES = ("edges.tsv", "features.csv", "labels.tsv", "splits.tsv")


def dataset_fingerprint(data_dir):
    digest = hashlib.sha256()
    for name in DATASET_FILES:
        path = os.path.join(data_dir, name)
        digest.update(name.encode())
        if os.path.exists(path):
            with open(path, "rb") as fh:
                digest.update(fh.read())
    return digest.hexdigest()


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def save_checkpoint(path, cfg: TrainConfig, model, disc, classes, multi_label, in_dim):
    payload = {
        "config_text": np.array(format_config(cfg)),
        "classes": np.array(list(classes)),
        "multi_label": np.array(int(multi_label)),
        "in_dim": np.array(int(in_dim)),
        "version": np.array(__version__),
    }
    for name in model.params.names():
        payload[f"model/{name}"] = model.params[name]
    if disc is not None:
        for name in disc.params.names():
            payload[f"disc/{name}"] = disc.params[name]
    buf = io.BytesIO()
    np.savez(buf, **payload)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        cfg = parse_config(str(data["config_text"]))
        classes = [str(c) for c in data["classes"]]
        multi_label = bool(int(data["multi_label"]))
        in_dim = int(data["in_dim"])
        model = build_model(cfg, in_dim, len(classes))
        model.init_params(np.random.default_rng(0), weight_decay=cfg.weight_decay)
        for name in model.params.names():
            model.params._slots[name].value = np.asarray(data[f"model/{name}"], dtype=np.float64)
    return cfg, model, classes, multi_label


def _final_metrics(g, result, cfg):
    """Test metrics for the best checkpoint and the last-epoch parameters."""
    def report(snapshot=None):
        if snapshot is not None:
            saved = result.model.params.snapshot()
            result.model.params.load(snapshot)
        logits = evaluate_logits(g, result.model, cfg)
        rep = classification_metrics(logits, g.label_matrix if g.multi_label else g.labels,
                                     g.splits["test"], multi_label=g.multi_label)
        if snapshot is not None:
            result.model.params.load(saved)
        return rep

    best = report()
    last = report(result.last_snapshot)
    key = "micro_f1" if g.multi_label else "accuracy"
    return {
        "best_epoch": result.best_epoch,
        "best_val": result.best_val,
        "last_val": result.last_val,
        "epochs_run": len(result.history),
        "test": json.loads(best.to_json()),
        "test_last": json.loads(last.to_json()),
        "headline": getattr(best, key),
    }


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.refine:
        cfg = cfg.replace(refine=True)
    if args.no_adversary:
        cfg = cfg.replace(adversary=False, adv_weight=0.0)
    cfg.validate()

    g = load_dataset(args.data, adj_as_features=args.adj_as_features)
    os.makedirs(args.out, exist_ok=True)

    artifacts = ["manifest.json", "checkpoint.bin", "history.jsonl", "metrics.json",
                 "training_curves.png"]
    if cfg.refine:
        artifacts.append("edges.tsv")
    _write_json(os.path.join(args.out, "manifest.json"), {
        "config": cfg.to_dict(),
        "dataset_fingerprint": dataset_fingerprint(args.data),
        "seed": cfg.seed,
        "artifacts": artifacts,
        "version": __version__,
    })

    result = train(g, cfg)

    save_checkpoint(os.path.join(args.out, "checkpoint.bin"), cfg, result.model,
                    result.disc, g.classes, g.multi_label, g.num_features)
    with open(os.path.join(args.out, "history.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(result.history.to_jsonl())
    _write_json(os.path.join(args.out, "metrics.json"), _final_metrics(g, result, cfg))
    plot_training_curves(result.history, os.path.join(args.out, "training_curves.png"))
    if cfg.refine:
        save_edges(result.graph.adj, os.path.join(args.out, "edges.tsv"))
    print(f"train: done, best_val={result.best_val:.4f} at epoch {result.best_epoch}")
    return 0


def _load_for_eval(args):
    cfg, model, classes, multi_label = load_checkpoint(args.checkpoint)
    g = load_dataset(args.data, adj_as_features=args.adj_as_features)
    if g.num_features != model.cfg.in_dim:
        raise DataError(f"dataset has {g.num_features} features, checkpoint expects {model.cfg.in_dim}")
    if len(g.classes) != len(classes):
        raise DataError("dataset classes do not match the checkpoint")
    return cfg, model, g


def cmd_eval(args):
    cfg, model, g = _load_for_eval(args)
    os.makedirs(args.out, exist_ok=True)
    protocol = args.protocol

    if protocol in ("classify", "multilabel"):
        if protocol == "classify" and g.multi_label:
            raise DataError("classify protocol needs a single-label dataset")
        if protocol == "multilabel" and not g.multi_label:
            raise DataError("multilabel protocol needs a multi-label dataset")
        logits = evaluate_logits(g, model, cfg)
        rep = classification_metrics(logits, g.label_matrix if g.multi_label else g.labels,
                                     g.splits["test"], multi_label=g.multi_label)
        path = os.path.join(args.out, f"eval_{protocol}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rep.to_json() + "\n")
        print(f"eval {protocol}: accuracy={rep.accuracy:.4f} micro_f1={rep.micro_f1:.4f}")
        return 0

    if protocol == "cluster":
        states = eval_states(g, model, cfg)
        labeled = np.flatnonzero(g.labels >= 0)
        seed = int(make_streams(cfg.seed)["kmeans"].integers(2 ** 31))
        rep = cluster_and_score(states.rep.value[labeled], g.labels[labeled],
                                g.num_classes, seed)
        path = os.path.join(args.out, "eval_cluster.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rep.to_json() + "\n")
        print(f"eval cluster: acc={rep.clustering_acc:.4f} nmi={rep.nmi:.4f} ari={rep.ari:.4f}")
        return 0

    if protocol == "confusion":
        states = eval_states(g, model, cfg)
        conf = component_confusion(states.aggregated.value)
        np.savetxt(os.path.join(args.out, "confusion.csv"), conf, fmt="%.8g", delimiter=",")
        plot_matrix_heatmap(conf, os.path.join(args.out, "confusion.png"),
                            title="component confusion", annotate=True)
        _write_json(os.path.join(args.out, "eval_confusion.json"),
                    {"mean_offdiagonal": mean_offdiagonal(conf)})
        print(f"eval confusion: mean off-diagonal {mean_offdiagonal(conf):.4f}")
        return 0

    if protocol == "simexport":
        states = eval_states(g, model, cfg)
        paths = export_similarity_matrix(states.rep.value, states.aggregated.value,
                                         g.labels, args.out)
        sim = np.loadtxt(paths[0], delimiter=",")
        plot_matrix_heatmap(sim, os.path.join(args.out, "similarity.png"),
                            title="class-sorted representation similarity")
        print(f"eval simexport: wrote {len(paths)} matrices")
        return 0

    if protocol == "lp":
        scores = {"initial": label_propagation_score(
            g.adj0, g.labels, g.splits["train"], g.splits["test"])}
        if args.edges:
            refined = _load_edges_as_adjacency(args.edges, g.n)
            scores["refined"] = label_propagation_score(
                refined, g.labels, g.splits["train"], g.splits["test"])
        _write_json(os.path.join(args.out, "eval_lp.json"), scores)
        plot_graph_scores(scores, os.path.join(args.out, "eval_lp.png"))
        print("eval lp: " + " ".join(f"{k}={v:.4f}" for k, v in scores.items()))
        return 0

    raise ConfigError(f"unknown protocol '{protocol}'")


def _load_edges_as_adjacency(path, n):
    from .graph import _parse_edges

    return _parse_edges(path, n)


def cmd_ablate(args):
    base = load_config(args.config)
    if args.seed is not None:
        base = base.replace(seed=args.seed)
    g = load_dataset(args.data, adj_as_features=args.adj_as_features)
    os.makedirs(args.out, exist_ok=True)
    seeds = [base.seed + i for i in range(args.seeds)]
    rows = ablation_matrix(g, base, seeds)

    with open(os.path.join(args.out, "ablation.csv"), "w", encoding="utf-8") as fh:
        fh.write("variant,seed,best_val,test_score,epochs_run\n")
        for r in rows:
            fh.write(f"{r['variant']},{r['seed']},{r['best_val']:.6f},"
                     f"{r['test_score']:.6f},{r['epochs_run']}\n")
    with open(os.path.join(args.out, "ablation_summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("variant,mean_test,std_test,mean_val,std_val\n")
        seen = []
        for r in rows:
            if r["variant"] not in seen:
                seen.append(r["variant"])
        for v in seen:
            tests = [r["test_score"] for r in rows if r["variant"] == v]
            vals = [r["best_val"] for r in rows if r["variant"] == v]
            fh.write(f"{v},{np.mean(tests):.6f},{np.std(tests):.6f},"
                     f"{np.mean(vals):.6f},{np.std(vals):.6f}\n")
    plot_ablation_bars(rows, os.path.join(args.out, "ablation.png"))
    print(f"ablate: {len(rows)} runs over {len(seeds)} seeds")
    return 0


def cmd_refine_eval(args):
    cfg, model, g = _load_for_eval(args)
    os.makedirs(args.out, exist_ok=True)
    train_ids, test_ids = g.splits["train"], g.splits["test"]

    scores = {"initial": label_propagation_score(g.adj0, g.labels, train_ids, test_ids)}
    states = eval_states(g, model, cfg)
    knn = knn_graph(states.rep.value, cfg.knn_size)
    scores["knn"] = label_propagation_score(knn, g.labels, train_ids, test_ids)
    if args.edges:
        refined = _load_edges_as_adjacency(args.edges, g.n)
        scores["refined"] = label_propagation_score(refined, g.labels, train_ids, test_ids)
        save_edges(refined, os.path.join(args.out, "edges.tsv"))
    else:
        save_edges(g.adj0, os.path.join(args.out, "edges.tsv"))

    _write_json(os.path.join(args.out, "refine_eval.json"), scores)
    plot_graph_scores(scores, os.path.join(args.out, "refine_eval.png"))
    print("refine-eval: " + " ".join(f"{k}={v:.4f}" for k, v in scores.items()))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="disengraph",
                                     description="Disentangled graph representation learning")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True)
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--refine", action="store_true")
    t.add_argument("--no-adversary", action="store_true")
    t.add_argument("--adj-as-features", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--protocol", required=True,
                   choices=["classify", "cluster", "multilabel", "confusion", "simexport", "lp"])
    e.add_argument("--out", required=True)
    e.add_argument("--edges", default=None, help="refined edges.tsv for the lp protocol")
    e.add_argument("--adj-as-features", action="store_true")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="train every ablation variant")
    a.add_argument("--data", required=True)
    a.add_argument("--config", required=True)
    a.add_argument("--seeds", type=int, required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--adj-as-features", action="store_true")
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("refine-eval", help="score adjacency variants by label propagation")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--edges", default=None, help="refined edges.tsv to score and export")
    r.add_argument("--adj-as-features", action="store_true")
    r.set_defaults(func=cmd_refine_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
