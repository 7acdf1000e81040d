"""Initial node feature matrices: seeded random, file-loaded, or random-walk.

The random-walk source builds node sequences by alternating node ->
uniformly random incident hyperedge -> uniformly random other member, with
an optional second-order return/exploration bias over consecutive node
pairs, then trains a skip-gram model with negative sampling by plain SGD.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .hypergraph import Hypergraph, HypergraphError

log = logging.getLogger(__name__)


@dataclass
class FeatureMatrix:
    values: np.ndarray  # N x d0
    source: str  # random | file | rw

    def __post_init__(self):
        if not np.isfinite(self.values).all():
            raise HypergraphError("feature matrix contains non-finite entries")


def random_features(num_nodes: int, dim: int, seed: int) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    return FeatureMatrix(values=rng.standard_normal((num_nodes, dim)),
                         source="random")


def load_features(path) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not lines:
        raise HypergraphError(f"{path}: empty feature file")
    header = lines[0].split()
    if len(header) != 2:
        raise HypergraphError(f"{path}: header must be 'N d'")
    n, d = int(header[0]), int(header[1])
    if len(lines) - 1 != n:
        raise HypergraphError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    values = np.empty((n, d))
    for i, line in enumerate(lines[1:]):
        row = line.split()
        if len(row) != d:
            raise HypergraphError(f"{path}: row {i} has {len(row)} entries, not {d}")
        values[i] = [float(tok) for tok in row]
    return FeatureMatrix(values=values, source="file")


def save_features(features: FeatureMatrix, path):
    n, d = features.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# features-v1\n")
        fh.write(f"{n} {d}\n")
        for row in features.values:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


# ---------------------------------------------------------------------------
# random-walk skip-gram features
# ---------------------------------------------------------------------------

def _neighbor_sets(h: Hypergraph) -> list[set[int]]:
    nbrs: list[set[int]] = [set() for _ in range(h.num_nodes)]
    for members in h.edges:
        for v in members:
            nbrs[v].update(members)
    for v, s in enumerate(nbrs):
        s.discard(v)
    return nbrs


def walk_step(h: Hypergraph, current: int, previous: int | None, p: float,
              q: float, neighbors, rng: np.random.Generator) -> int:
    """One node -> hyperedge -> node move with a return/exploration bias.

    The hyperedge is drawn uniformly from the current node's incidence and
    the next member uniformly within it (excluding the current node when
    possible); with ``previous`` set, candidates are reweighted 1/p when
    returning, 1 when sharing a hyperedge with the previous node, and 1/q
    otherwise.
    """
    incident = h.incidence[current]
    edge = h.edges[incident[rng.integers(len(incident))]]
    candidates = [u for u in edge if u != current] if len(edge) > 1 else [current]
    if previous is None or (p == 1.0 and q == 1.0) or len(candidates) == 1:
        return candidates[rng.integers(len(candidates))]
    weights = np.empty(len(candidates))
    prev_nbrs = neighbors[previous]
    for i, u in enumerate(candidates):
        if u == previous:
            weights[i] = 1.0 / p
        elif u in prev_nbrs:
            weights[i] = 1.0
        else:
            weights[i] = 1.0 / q
    weights /= weights.sum()
    return candidates[rng.choice(len(candidates), p=weights)]


def generate_walks(h: Hypergraph, walk_len: int, walks_per_node: int, p: float,
                   q: float, seed: int) -> list[list[int]]:
    rng = np.random.default_rng(seed)
    neighbors = _neighbor_sets(h) if (p != 1.0 or q != 1.0) else None
    walks = []
    for start in range(h.num_nodes):
        if not h.incidence[start]:
            continue
        for _ in range(walks_per_node):
            walk = [start]
            prev = None
            while len(walk) < walk_len:
                nxt = walk_step(h, walk[-1], prev, p, q, neighbors, rng)
                prev = walk[-1]
                walk.append(nxt)
            walks.append(walk)
    return walks


def rw_features(h: Hypergraph, dim: int, walk_len: int = 40,
                walks_per_node: int = 10, window: int = 10,
                neg_samples: int = 5, p: float = 1.0, q: float = 1.0,
                epochs: int = 1, seed: int = 0,
                learning_rate: float = 0.025) -> FeatureMatrix:
    """Skip-gram embeddings of random walks, trained with negative sampling.

    Negatives are drawn from the unigram distribution raised to 3/4.
    Isolated nodes never appear in walks and receive zero vectors.
    """
    n = h.num_nodes
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    walks = generate_walks(h, walk_len, walks_per_node, p, q, seed)
    if not walks:
        raise HypergraphError("no walks generated: every node is isolated")

    counts = np.zeros(n)
    for walk in walks:
        counts += np.bincount(walk, minlength=n)
    noise = counts ** 0.75
    noise /= noise.sum()

    visited = counts > 0
    if not visited.all():
        log.warning("%d isolated node(s) receive zero feature vectors",
                    int(np.sum(~visited)))

    w_in = (rng.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim))

    for _ in range(epochs):
        for walk in walks:
            arr = np.asarray(walk)
            for i, center in enumerate(arr):
                lo = max(0, i - window)
                hi = min(len(arr), i + window + 1)
                context = np.concatenate([arr[lo:i], arr[i + 1:hi]])
                if context.size == 0:
                    continue
                negatives = rng.choice(n, size=(context.size, neg_samples),
                                       p=noise)
                targets = np.column_stack([context, negatives])
                signs = np.zeros(targets.shape)
                signs[:, 0] = 1.0
                vecs = w_out[targets]  # (ctx, 1+neg, dim)
                scores = 1.0 / (1.0 + np.exp(-vecs @ w_in[center]))
                err = (signs - scores) * learning_rate  # (ctx, 1+neg)
                grad_center = np.einsum("cn,cnd->d", err, vecs)
                np.add.at(w_out, targets, err[:, :, None] * w_in[center])
                w_in[center] += grad_center
    w_in[~visited] = 0.0
    return FeatureMatrix(values=w_in, source="rw")
