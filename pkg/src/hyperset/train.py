"""Training loop with Adam, hyperedge mini-batching, and early stopping.

Every optimization step runs a full-graph forward; the batch only selects
which labeled (node, hyperedge) pairs contribute to the mean cross-entropy
loss.  After each epoch the model is scored on the validation split; the
epoch with the best validation accuracy is kept, and training stops once
accuracy has not improved for ``patience`` consecutive epochs.  Grid
search trains one run per (learning rate, batch size) combination and
picks the one maximizing the mean of validation micro- and macro-F1.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .encoding import EncodingTable
from .evaluate import Predictions, jsd_node_label_distributions, macro_f1, micro_f1
from .hypergraph import EdgeDependentLabels, Hypergraph, Split
from .model import (
    ModelConfig,
    ModelParams,
    forward,
    init_params,
    pair_loss,
    predict_pairs,
    save_checkpoint,
)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("training settings must be positive")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_micro_f1: float
    val_macro_f1: float
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord]
    best_epoch: int
    best_val_micro_f1: float
    best_val_macro_f1: float
    stop_reason: str
    total_seconds: float
    checkpoint_path: str | None = None
    model_config: dict = field(default_factory=dict)
    train_config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        d = dict(d)
        d["epochs"] = [EpochRecord(**e) for e in d["epochs"]]
        return cls(**d)

    def semantic_dict(self) -> dict:
        """Report content minus wall-clock fields, for determinism checks."""
        d = self.to_dict()
        d.pop("total_seconds")
        d.pop("checkpoint_path")
        for e in d["epochs"]:
            e.pop("seconds")
        return d

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"format_version": 1, **self.to_dict()}, fh, indent=1)

    @classmethod
    def load(cls, path) -> "TrainReport":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        d.pop("format_version", None)
        return cls.from_dict(d)


def labeled_pairs(h: Hypergraph, labels: EdgeDependentLabels, edge_ids):
    nodes, edges, targets = [], [], []
    for e in edge_ids:
        row = labels.labels[e]
        if row is None:
            continue
        nodes.extend(h.edges[e])
        edges.extend([e] * len(h.edges[e]))
        targets.extend(row)
    return (np.asarray(nodes, dtype=np.int64),
            np.asarray(edges, dtype=np.int64),
            np.asarray(targets, dtype=np.int64))


def predict_edge_set(h, labels, x0, pe, params, config, edge_ids) -> Predictions:
    """Eval-mode predictions for every labeled pair of the given hyperedges."""
    nodes, edges, targets = labeled_pairs(h, labels, edge_ids)
    if len(nodes) == 0:
        raise ValueError("no labeled pairs in the given hyperedges")
    with ad.no_grad():
        state = forward(h, x0, pe, params, config)
        predicted = predict_pairs(state, params, config, h, nodes, edges)
    return Predictions(nodes=nodes, edges=edges, true_labels=targets,
                       predicted=predicted, num_classes=labels.num_classes)


def evaluate_split(h, labels, x0, pe, params, config, edge_ids) -> dict:
    preds = predict_edge_set(h, labels, x0, pe, params, config, edge_ids)
    return {
        "micro_f1": micro_f1(preds),
        "macro_f1": macro_f1(preds),
        "avg_jsd": jsd_node_label_distributions(preds, labels.num_classes),
        "num_pairs": len(preds),
    }


def train(h: Hypergraph, labels: EdgeDependentLabels, x0: np.ndarray,
          pe: EncodingTable | None, split: Split, model_config: ModelConfig,
          train_config: TrainConfig, checkpoint_path=None,
          report_path=None) -> tuple[TrainReport, ad.ParamStore, ModelParams]:
    """Train from scratch and return the best-validation-epoch parameters."""
    if not split.train:
        raise ValueError("empty training split")
    start = time.perf_counter()
    store, params = init_params(model_config, seed=train_config.seed)
    ss = np.random.SeedSequence(train_config.seed)
    shuffle_ss, dropout_ss = ss.spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    train_edges = np.asarray(split.train, dtype=np.int64)
    records: list[EpochRecord] = []
    best_acc = -1.0
    best_macro = 0.0
    best_epoch = -1
    best_state: dict | None = None
    wait = 0
    stop_reason = "max_epochs"

    for epoch in range(1, train_config.max_epochs + 1):
        tick = time.perf_counter()
        order = shuffle_rng.permutation(len(train_edges))
        loss_sum = 0.0
        pair_count = 0
        for lo in range(0, len(train_edges), train_config.batch_size):
            batch = train_edges[order[lo:lo + train_config.batch_size]]
            nodes, edges, targets = labeled_pairs(h, labels, batch)
            if len(nodes) == 0:
                continue
            try:
                state = forward(h, x0, pe, params, model_config, training=True,
                                rng=dropout_rng, sample_seed=train_config.seed,
                                epoch=epoch)
                loss = pair_loss(state, params, model_config, h,
                                 nodes, edges, targets)
                store.zero_grads()
                ad.backward(loss)
            except ad.NonFiniteError as err:
                raise TrainingDiverged(
                    f"non-finite value at epoch {epoch}: {err}") from err
            ad.adam_step(store, lr=train_config.learning_rate)
            loss_sum += loss.item() * len(nodes)
            pair_count += len(nodes)

        val = evaluate_split(h, labels, x0, pe, params, model_config, split.val)
        records.append(EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / max(pair_count, 1),
            val_micro_f1=val["micro_f1"],
            val_macro_f1=val["macro_f1"],
            seconds=time.perf_counter() - tick,
        ))
        # early stopping monitors validation accuracy (micro-F1)
        if val["micro_f1"] > best_acc:
            best_acc = val["micro_f1"]
            best_macro = val["macro_f1"]
            best_epoch = epoch
            best_state = store.state_dict()
            wait = 0
        else:
            wait += 1
            if wait > train_config.patience:
                stop_reason = "patience"
                break

    store.load_state_dict(best_state)
    report = TrainReport(
        epochs=records,
        best_epoch=best_epoch,
        best_val_micro_f1=best_acc,
        best_val_macro_f1=best_macro,
        stop_reason=stop_reason,
        total_seconds=time.perf_counter() - start,
        checkpoint_path=str(checkpoint_path) if checkpoint_path else None,
        model_config=model_config.to_dict(),
        train_config=asdict(train_config),
    )
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model_config, store)
    if report_path is not None:
        report.save(report_path)
    return report, store, params


@dataclass
class GridSearchResult:
    combos: list[dict]
    best_index: int
    report: TrainReport
    test_metrics: dict


def grid_search(h, labels, x0, pe, split, model_config: ModelConfig,
                learning_rates, batch_sizes, base_train_config: TrainConfig,
                checkpoint_path=None) -> GridSearchResult:
    """Train every (lr, batch) combination; select by val mean(micro, macro)."""
    if not learning_rates or not batch_sizes:
        raise ValueError("empty hyperparameter grid")
    combos = []
    best = None
    for i, (lr, bs) in enumerate(itertools.product(learning_rates, batch_sizes)):
        cfg = TrainConfig(learning_rate=lr, batch_size=bs,
                          max_epochs=base_train_config.max_epochs,
                          patience=base_train_config.patience,
                          seed=base_train_config.seed)
        report, store, params = train(h, labels, x0, pe, split, model_config, cfg)
        selection = 0.5 * (report.best_val_micro_f1 + report.best_val_macro_f1)
        combos.append({"learning_rate": lr, "batch_size": bs,
                       "val_selection": selection, "report": report})
        if best is None or selection > best[1]:
            best = (i, selection, report, store, params)
    index, _, report, store, params = best
    test_metrics = evaluate_split(h, labels, x0, pe, params, model_config,
                                  split.test)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model_config, store)
        report.checkpoint_path = str(checkpoint_path)
    return GridSearchResult(combos=combos, best_index=index, report=report,
                            test_metrics=test_metrics)
