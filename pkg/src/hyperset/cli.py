"""Command-line front-end for reproducible, seeded pipeline runs.

Subcommands: synth, features, centrality, train, eval, predict, rank.
Options can also come from a flat key=value config file (``--config``,
``#`` comments allowed); explicit flags override file values and unknown
keys are rejected.  Every command exits 0 on success and 1 with a
single-line diagnostic otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import centrality as centrality_mod
from . import encoding as encoding_mod
from . import features as features_mod
from . import rank as rank_mod
from .hypergraph import (
    HypergraphError,
    generate_synthetic,
    load_hypergraph,
    load_labels,
    save_hypergraph,
    save_labels,
    split_edges,
)
from .model import ModelConfig, forward, load_checkpoint, predict_pairs
from .train import TrainConfig, TrainingDiverged, evaluate_split, grid_search, train


class CliError(Exception):
    pass


def _onoff(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {value!r}")
    return value == "on"


class Required:
    """Marks a setting with no default; carries the type for config files."""

    def __init__(self, typ=str):
        self.typ = typ


SETTINGS: dict[str, dict] = {
    "synth": {"nodes": Required(int), "edges": Required(int),
              "classes": Required(int), "min_size": 3, "max_size": 8,
              "seed": 0, "out": Required()},
    "features": {"hypergraph": Required(), "out": Required(),
                 "source": "random", "dim": 64, "seed": 0},
    "centrality": {"hypergraph": Required(), "out": Required()},
    "train": {"hypergraph": Required(), "labels": Required(), "features": None,
              "out": Required(), "seed": 0, "split_seed": 0, "lr": 0.001,
              "batch_size": 64, "max_epochs": 100, "patience": 25,
              "grid": False, "layers": 1, "hidden_dim": 64, "final_dim": 128,
              "inducing_points": 4, "heads": 4, "dropout": 0.7, "pe": True,
              "within_att": True, "sample_size": 0, "classes": 3},
    "eval": {"hypergraph": Required(), "labels": Required(), "features": None,
             "checkpoint": Required(), "split": "test", "split_seed": 0,
             "seed": 0, "out": None},
    "predict": {"hypergraph": Required(), "labels": Required(),
                "features": None, "checkpoint": Required(), "seed": 0,
                "out": Required()},
    "rank": {"hypergraph": Required(), "labels": Required(), "classes": 3,
             "weights": None, "alpha": 0.0, "scores": None,
             "out": Required()},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperset",
        description="edge-dependent node classification on hypergraphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(p, *names, **kwargs):
        kwargs.setdefault("default", argparse.SUPPRESS)
        p.add_argument(*names, **kwargs)

    def common_model_flags(p):
        add(p, "--layers", type=int)
        add(p, "--hidden-dim", type=int)
        add(p, "--final-dim", type=int)
        add(p, "--inducing-points", type=int)
        add(p, "--heads", type=int)
        add(p, "--dropout", type=float)
        add(p, "--pe", type=_onoff, metavar="on|off")
        add(p, "--within-att", type=_onoff, metavar="on|off")
        add(p, "--sample-size", type=int)
        add(p, "--classes", type=int)

    p = sub.add_parser("synth", help="write a synthetic hypergraph + labels")
    add(p, "--nodes", type=int)
    add(p, "--edges", type=int)
    add(p, "--classes", type=int)
    add(p, "--min-size", type=int)
    add(p, "--max-size", type=int)
    add(p, "--seed", type=int)
    add(p, "--out", help="output directory")
    add(p, "--config")

    p = sub.add_parser("features", help="write an initial feature matrix")
    add(p, "--hypergraph")
    add(p, "--out", help="output feature file")
    add(p, "--source", choices=("random", "rw"))
    add(p, "--dim", type=int)
    add(p, "--seed", type=int)
    add(p, "--config")

    p = sub.add_parser("centrality", help="write the node-centrality TSV")
    add(p, "--hypergraph")
    add(p, "--out")
    add(p, "--config")

    p = sub.add_parser("train", help="train a model, write checkpoint + report")
    add(p, "--hypergraph")
    add(p, "--labels")
    add(p, "--features")
    add(p, "--out", help="output directory")
    add(p, "--seed", type=int)
    add(p, "--split-seed", type=int)
    add(p, "--lr", type=float)
    add(p, "--batch-size", type=int)
    add(p, "--max-epochs", type=int)
    add(p, "--patience", type=int)
    add(p, "--grid", action="store_true",
        help="search the lr x batch-size grid instead of a single run")
    common_model_flags(p)
    add(p, "--config")

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    add(p, "--hypergraph")
    add(p, "--labels")
    add(p, "--features")
    add(p, "--checkpoint")
    add(p, "--split", choices=("train", "val", "test"))
    add(p, "--split-seed", type=int)
    add(p, "--seed", type=int)
    add(p, "--out", help="also write the metrics JSON here")
    add(p, "--config")

    p = sub.add_parser("predict", help="predict labels for unlabeled hyperedges")
    add(p, "--hypergraph")
    add(p, "--labels")
    add(p, "--features")
    add(p, "--checkpoint")
    add(p, "--seed", type=int)
    add(p, "--out", help="output TSV")
    add(p, "--config")

    p = sub.add_parser("rank", help="rank nodes by the label-weighted walk")
    add(p, "--hypergraph")
    add(p, "--labels")
    add(p, "--classes", type=int)
    add(p, "--weights", help="label->weight map, e.g. '0:2,1:1,2:2'")
    add(p, "--alpha", type=float)
    add(p, "--scores", help="node scores file for pairwise accuracy")
    add(p, "--out", help="output directory")
    add(p, "--config")
    return parser


def _coerce(key: str, raw: str, template):
    if isinstance(template, Required):
        return template.typ(raw)
    if isinstance(template, bool):
        if raw in ("on", "true", "1"):
            return True
        if raw in ("off", "false", "0"):
            return False
        raise CliError(f"setting {key!r} expects on/off, got {raw!r}")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    return raw


def _load_config_file(path, settings: dict) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise CliError(f"cannot read config file: {err}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in settings:
            raise CliError(f"{path}:{lineno}: unknown setting {key!r}")
        values[key] = _coerce(key, value.strip(), settings[key])
    return values


def _merge_options(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags; missing required -> error."""
    command = args.command
    settings = SETTINGS[command]
    given = {k: v for k, v in vars(args).items() if k != "command"}
    config_path = given.pop("config", None)
    options = {k: v for k, v in settings.items()
               if not isinstance(v, Required)}
    if config_path:
        options.update(_load_config_file(config_path, settings))
    options.update(given)
    missing = [k for k, v in settings.items()
               if isinstance(v, Required) and k not in options]
    if missing:
        raise CliError(f"missing required setting(s): "
                       f"{', '.join('--' + m.replace('_', '-') for m in missing)}")
    return options


def _model_config(opts, feature_dim: int) -> ModelConfig:
    return ModelConfig(
        num_classes=opts["classes"],
        num_layers=opts["layers"],
        hidden_dim=opts["hidden_dim"],
        final_dim=opts["final_dim"],
        heads=opts["heads"],
        inducing_points=opts["inducing_points"],
        dropout=opts["dropout"],
        sample_size=opts["sample_size"],
        feature_dim=feature_dim,
        use_pe=opts["pe"],
        use_within_att=opts["within_att"],
    )


def _load_inputs(opts, num_classes: int, default_dim: int):
    h = load_hypergraph(opts["hypergraph"])
    labels = load_labels(opts["labels"], num_classes, h)
    if opts.get("features"):
        feats = features_mod.load_features(opts["features"])
        if feats.values.shape[0] != h.num_nodes:
            raise CliError("feature row count does not match the hypergraph")
    else:
        feats = features_mod.random_features(h.num_nodes, default_dim,
                                             seed=opts.get("seed", 0))
    pe = encoding_mod.encode_all(h, centrality_mod.compute_all(h))
    return h, labels, feats, pe


def _cmd_synth(opts):
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    h, labels = generate_synthetic(
        opts["nodes"], opts["edges"], (opts["min_size"], opts["max_size"]),
        opts["classes"], seed=opts["seed"])
    save_hypergraph(h, out / "hypergraph.txt")
    save_labels(labels, out / "labels.txt")
    print(f"wrote {out / 'hypergraph.txt'} and {out / 'labels.txt'}")


def _cmd_features(opts):
    h = load_hypergraph(opts["hypergraph"])
    if opts["source"] == "random":
        feats = features_mod.random_features(h.num_nodes, opts["dim"],
                                             seed=opts["seed"])
    elif opts["source"] == "rw":
        feats = features_mod.rw_features(h, opts["dim"], seed=opts["seed"])
    else:
        raise CliError(f"unknown feature source {opts['source']!r}")
    features_mod.save_features(feats, opts["out"])
    print(f"wrote {opts['out']}")


def _cmd_centrality(opts):
    h = load_hypergraph(opts["hypergraph"])
    centrality_mod.write_tsv(centrality_mod.compute_all(h), opts["out"])
    print(f"wrote {opts['out']}")


def _cmd_train(opts):
    from .plots import training_curves

    h, labels, feats, pe = _load_inputs(opts, opts["classes"],
                                        opts["hidden_dim"])
    model_config = _model_config(opts, feature_dim=feats.values.shape[1])
    split = split_edges(labels.labeled_edges(), seed=opts["split_seed"])
    train_config = TrainConfig(learning_rate=opts["lr"],
                               batch_size=opts["batch_size"],
                               max_epochs=opts["max_epochs"],
                               patience=opts["patience"], seed=opts["seed"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / "checkpoint.json"
    if opts["grid"]:
        result = grid_search(h, labels, feats.values, pe, split, model_config,
                             learning_rates=(0.001, 0.0001),
                             batch_sizes=(64, 128),
                             base_train_config=train_config,
                             checkpoint_path=checkpoint)
        report = result.report
        print(f"grid winner: combo {result.best_index}, "
              f"test micro-F1 {result.test_metrics['micro_f1']:.4f}")
    else:
        report, _, _ = train(h, labels, feats.values, pe, split, model_config,
                             train_config, checkpoint_path=checkpoint)
    report.save(out / "report.json")
    training_curves(report, out / "training_curves.png")
    print(f"best epoch {report.best_epoch}: "
          f"val micro-F1 {report.best_val_micro_f1:.4f}, "
          f"val macro-F1 {report.best_val_macro_f1:.4f}")
    print(f"wrote {checkpoint}, {out / 'report.json'}, "
          f"{out / 'training_curves.png'}")


def _cmd_eval(opts):
    config, store, params = load_checkpoint(opts["checkpoint"])
    h, labels, feats, pe = _load_inputs(opts, config.num_classes,
                                        config.feature_dim)
    split = split_edges(labels.labeled_edges(), seed=opts["split_seed"])
    edge_ids = getattr(split, opts["split"])
    metrics = evaluate_split(h, labels, feats.values, pe, params, config,
                             edge_ids)
    metrics["split"] = opts["split"]
    payload = json.dumps(metrics, indent=1)
    print(payload)
    if opts["out"]:
        Path(opts["out"]).write_text(payload + "\n", encoding="utf-8")


def _cmd_predict(opts):
    config, store, params = load_checkpoint(opts["checkpoint"])
    h, labels, feats, pe = _load_inputs(opts, config.num_classes,
                                        config.feature_dim)
    unlabeled = labels.unlabeled_edges()
    if not unlabeled:
        raise CliError("no unlabeled hyperedges to predict")
    nodes = np.asarray([v for e in unlabeled for v in h.edges[e]])
    edges = np.asarray([e for e in unlabeled for _ in h.edges[e]])
    with ad.no_grad():
        state = forward(h, feats.values, pe, params, config)
        predicted = predict_pairs(state, params, config, h, nodes, edges)
    with open(opts["out"], "w", encoding="utf-8") as fh:
        fh.write("# predictions-v1\n")
        fh.write("edge_id\tnode_id\tpredicted_label\n")
        for e, v, y in zip(edges, nodes, predicted):
            fh.write(f"{e}\t{v}\t{y}\n")
    print(f"wrote {opts['out']} ({len(nodes)} pairs)")


def _parse_weight_map(text: str) -> dict[int, float]:
    mapping = {}
    for part in text.split(","):
        label, sep, weight = part.partition(":")
        if not sep:
            raise CliError(f"malformed weight map entry {part!r}")
        try:
            mapping[int(label)] = float(weight)
        except ValueError:
            raise CliError(f"malformed weight map entry {part!r}") from None
    if not mapping:
        raise CliError("empty weight map")
    return mapping


def _cmd_rank(opts):
    from .plots import stationary_distribution

    h = load_hypergraph(opts["hypergraph"])
    labels = load_labels(opts["labels"], opts["classes"], h)
    if opts["weights"]:
        weights = rank_mod.labels_to_weights(h, labels,
                                             _parse_weight_map(opts["weights"]))
    else:
        weights = rank_mod.uniform_weights(h)
    result = rank_mod.stationary(h, weights, alpha=opts["alpha"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    rank_mod.write_ranking_tsv(result, out / "ranking.tsv")
    stationary_distribution(result, out / "stationary.png")
    print(f"wrote {out / 'ranking.tsv'} and {out / 'stationary.png'}")
    if opts["scores"]:
        scores = np.zeros(h.num_nodes)
        for line in Path(opts["scores"]).read_text(encoding="utf-8").splitlines():
            if line.startswith("#") or not line.strip():
                continue
            v, s = line.split()
            scores[int(v)] = float(s)
        acc = rank_mod.pairwise_accuracy(result, scores)
        print(f"pairwise accuracy vs scores: {acc:.4f}")


_COMMANDS = {
    "synth": _cmd_synth,
    "features": _cmd_features,
    "centrality": _cmd_centrality,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "rank": _cmd_rank,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge_options(args)
        _COMMANDS[args.command](opts)
    except (CliError, HypergraphError, rank_mod.RankingError, TrainingDiverged,
            ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
