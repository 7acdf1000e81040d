"""Classification metrics and random baselines.

Micro-F1 over single-label multiclass predictions equals plain accuracy;
macro-F1 averages per-class F1, skipping classes that appear in neither
the truth nor the predictions.  The distribution metric compares, per
node, the empirical distribution of its true labels against its predicted
labels across that node's pairs, via Jensen-Shannon divergence with
base-2 logarithms (so the value lies in [0, 1]), averaged over nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Predictions:
    """Aligned (node, hyperedge, true label, predicted label) records."""

    nodes: np.ndarray
    edges: np.ndarray
    true_labels: np.ndarray
    predicted: np.ndarray
    num_classes: int = field(default=0)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.edges = np.asarray(self.edges, dtype=np.int64)
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        self.predicted = np.asarray(self.predicted, dtype=np.int64)
        n = len(self.nodes)
        if not (len(self.edges) == len(self.true_labels) == len(self.predicted) == n):
            raise ValueError("prediction columns have mismatched lengths")
        pairs = set(zip(self.nodes.tolist(), self.edges.tolist()))
        if len(pairs) != n:
            raise ValueError("duplicate (node, hyperedge) pair in predictions")
        if self.num_classes == 0:
            self.num_classes = int(max(self.true_labels.max(initial=0),
                                       self.predicted.max(initial=0))) + 1
        if n and (self.true_labels.max() >= self.num_classes
                  or self.predicted.max() >= self.num_classes):
            raise ValueError("label out of class range")

    def __len__(self):
        return len(self.nodes)


def micro_f1(preds: Predictions) -> float:
    """For single-label multiclass this reduces to overall accuracy."""
    if len(preds) == 0:
        raise ValueError("empty prediction set")
    return float(np.mean(preds.true_labels == preds.predicted))


def macro_f1(preds: Predictions) -> float:
    if len(preds) == 0:
        raise ValueError("empty prediction set")
    scores = []
    for c in range(preds.num_classes):
        tp = int(np.sum((preds.predicted == c) & (preds.true_labels == c)))
        fp = int(np.sum((preds.predicted == c) & (preds.true_labels != c)))
        fn = int(np.sum((preds.predicted != c) & (preds.true_labels == c)))
        if tp + fp + fn == 0:
            continue  # class absent from both truth and predictions
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


def jsd(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence with base-2 logs; 0 iff p == q, at most 1."""
    m = 0.5 * (p + q)

    def kl(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))

    return 0.5 * kl(p) + 0.5 * kl(q)


def jsd_node_label_distributions(preds: Predictions, num_classes: int) -> float:
    """Average, over nodes, of the JSD between true and predicted label mixes."""
    if len(preds) == 0:
        raise ValueError("empty prediction set")
    values = []
    for v in np.unique(preds.nodes):
        at_v = preds.nodes == v
        p = np.bincount(preds.true_labels[at_v], minlength=num_classes).astype(float)
        q = np.bincount(preds.predicted[at_v], minlength=num_classes).astype(float)
        values.append(jsd(p / p.sum(), q / q.sum()))
    return float(np.mean(values))


def baseline_uniform(nodes, edges, true_labels, num_classes: int,
                     seed: int) -> Predictions:
    rng = np.random.default_rng(seed)
    predicted = rng.integers(0, num_classes, size=len(np.asarray(nodes)))
    return Predictions(nodes=nodes, edges=edges, true_labels=true_labels,
                       predicted=predicted, num_classes=num_classes)


def baseline_proportional(nodes, edges, true_labels, class_freq,
                          seed: int) -> Predictions:
    freq = np.asarray(class_freq, dtype=float)
    if abs(freq.sum() - 1.0) > 1e-9:
        raise ValueError("class frequencies must sum to 1")
    rng = np.random.default_rng(seed)
    predicted = rng.choice(len(freq), size=len(np.asarray(nodes)), p=freq)
    return Predictions(nodes=nodes, edges=edges, true_labels=true_labels,
                       predicted=predicted, num_classes=len(freq))


def training_label_frequencies(labels, edge_ids, num_classes: int) -> np.ndarray:
    """Empirical class distribution over the labeled pairs of given edges."""
    counts = np.zeros(num_classes)
    for e in edge_ids:
        row = labels.labels[e]
        if row is not None:
            counts += np.bincount(row, minlength=num_classes)
    total = counts.sum()
    if total == 0:
        raise ValueError("no labeled pairs in the given edges")
    return counts / total
