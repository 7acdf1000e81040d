"""Hypergraph data model, edge-dependent labels, file I/O, splits, synthesis.

File formats (UTF-8 text, lines starting with ``#`` are ignored):

* hypergraph: header ``N M`` then M lines of space-separated node ids
* labels:     M lines parallel to the hypergraph file, each either one
              integer per member (in member order) or the single token ``?``
* vocabulary: one ``token<TAB>id`` per line
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNLABELED_TOKEN = "?"


class HypergraphError(ValueError):
    """Structurally invalid hypergraph or label input."""


@dataclass
class Hypergraph:
    """Nodes 0..N-1 plus an ordered list of hyperedges.

    Each hyperedge is an ordered list of distinct node ids; ``incidence[v]``
    lists the ids of hyperedges containing v, in edge-scan order.  The flat
    ``member_nodes``/``member_edges`` arrays enumerate all (node, edge)
    memberships edge-major, which is the layout every vectorized pass in
    this package works on.
    """

    num_nodes: int
    edges: list[list[int]]
    incidence: list[list[int]] = field(init=False)
    incidence_positions: list[list[int]] = field(init=False)
    member_nodes: np.ndarray = field(init=False)
    member_edges: np.ndarray = field(init=False)
    edge_offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.num_nodes
        if n < 0:
            raise HypergraphError("negative node count")
        flat_nodes: list[int] = []
        flat_edges: list[int] = []
        offsets = [0]
        incidence: list[list[int]] = [[] for _ in range(n)]
        positions: list[list[int]] = [[] for _ in range(n)]
        pos = 0
        for e, members in enumerate(self.edges):
            if not members:
                raise HypergraphError(f"hyperedge {e} is empty")
            seen = set()
            for v in members:
                if not 0 <= v < n:
                    raise HypergraphError(
                        f"node id {v} out of range [0, {n}) in hyperedge {e}")
                if v in seen:
                    raise HypergraphError(f"duplicate node {v} in hyperedge {e}")
                seen.add(v)
                incidence[v].append(e)
                positions[v].append(pos)
                flat_nodes.append(v)
                flat_edges.append(e)
                pos += 1
            offsets.append(pos)
        self.incidence = incidence
        self.incidence_positions = positions
        self.member_nodes = np.asarray(flat_nodes, dtype=np.int64)
        self.member_edges = np.asarray(flat_edges, dtype=np.int64)
        self.edge_offsets = np.asarray(offsets, dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def total_memberships(self) -> int:
        return int(self.member_nodes.shape[0])

    def edge_sizes(self) -> np.ndarray:
        return np.diff(self.edge_offsets)

    def degrees(self) -> np.ndarray:
        return np.asarray([len(inc) for inc in self.incidence], dtype=np.int64)

    def position_of(self, v: int, e: int) -> int:
        """Flat membership index of the pair (v, e)."""
        members = self.edges[e]
        for i, u in enumerate(members):
            if u == v:
                return int(self.edge_offsets[e]) + i
        raise HypergraphError(f"node {v} is not a member of hyperedge {e}")


@dataclass
class EdgeDependentLabels:
    """Per-(node, hyperedge) labels, parallel to each edge's member list.

    ``labels[e]`` is None for an unlabeled hyperedge.
    """

    num_classes: int
    labels: list[list[int] | None]

    def __post_init__(self):
        if self.num_classes < 1:
            raise HypergraphError("num_classes must be >= 1")
        for e, row in enumerate(self.labels):
            if row is None:
                continue
            for y in row:
                if not 0 <= y < self.num_classes:
                    raise HypergraphError(
                        f"label {y} >= num_classes {self.num_classes} "
                        f"in hyperedge {e}")

    def labeled_edges(self) -> list[int]:
        return [e for e, row in enumerate(self.labels) if row is not None]

    def unlabeled_edges(self) -> list[int]:
        return [e for e, row in enumerate(self.labels) if row is None]


@dataclass
class Split:
    train: list[int]
    val: list[int]
    test: list[int]

    def __post_init__(self):
        parts = [set(self.train), set(self.val), set(self.test)]
        total = sum(len(p) for p in parts)
        if len(parts[0] | parts[1] | parts[2]) != total:
            raise HypergraphError("split parts are not pairwise disjoint")


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def _data_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]


def _parse_int(token: str, context: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise HypergraphError(f"non-integer token {token!r} in {context}") from None


def load_hypergraph(path) -> Hypergraph:
    lines = _data_lines(path)
    if not lines:
        raise HypergraphError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise HypergraphError(f"{path}: header must be 'N M'")
    n = _parse_int(header[0], "header")
    m = _parse_int(header[1], "header")
    body = lines[1:]
    if len(body) != m:
        raise HypergraphError(
            f"{path}: header declares {m} hyperedges, found {len(body)} lines")
    edges = []
    for i, line in enumerate(body):
        if line.strip() == "":
            raise HypergraphError(f"{path}: hyperedge {i} is empty")
        edges.append([_parse_int(tok, f"hyperedge {i}") for tok in line.split()])
    return Hypergraph(num_nodes=n, edges=edges)


def save_hypergraph(h: Hypergraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# hypergraph-v1\n")
        fh.write(f"{h.num_nodes} {h.num_edges}\n")
        for members in h.edges:
            fh.write(" ".join(str(v) for v in members) + "\n")


def load_labels(path, num_classes: int, h: Hypergraph) -> EdgeDependentLabels:
    lines = _data_lines(path)
    if len(lines) != h.num_edges:
        raise HypergraphError(
            f"{path}: {len(lines)} label lines for {h.num_edges} hyperedges")
    labels: list[list[int] | None] = []
    for e, line in enumerate(lines):
        tokens = line.split()
        if tokens == [UNLABELED_TOKEN]:
            labels.append(None)
            continue
        if len(tokens) != len(h.edges[e]):
            raise HypergraphError(
                f"{path}: hyperedge {e} has {len(h.edges[e])} members but "
                f"{len(tokens)} labels")
        labels.append([_parse_int(tok, f"labels line {e}") for tok in tokens])
    return EdgeDependentLabels(num_classes=num_classes, labels=labels)


def save_labels(labels: EdgeDependentLabels, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# labels-v1\n")
        for row in labels.labels:
            if row is None:
                fh.write(UNLABELED_TOKEN + "\n")
            else:
                fh.write(" ".join(str(y) for y in row) + "\n")


def load_vocab(path) -> dict[str, int]:
    vocab: dict[str, int] = {}
    for line in _data_lines(path):
        token, _, idx = line.partition("\t")
        if not idx:
            raise HypergraphError(f"{path}: expected 'token<TAB>id', got {line!r}")
        vocab[token] = _parse_int(idx, "vocabulary")
    return vocab


# ---------------------------------------------------------------------------
# splitting and synthesis
# ---------------------------------------------------------------------------

def split_edges(labeled_edges, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> Split:
    """Shuffle and cut labeled edge ids; floor-division remainder goes to train."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise HypergraphError(f"split ratios {ratios} do not sum to 1")
    ids = sorted(labeled_edges)
    m = len(ids)
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    n_train = int(ratios[0] * m)
    n_val = int(ratios[1] * m)
    n_test = int(ratios[2] * m)
    n_train += m - (n_train + n_val + n_test)
    shuffled = [ids[i] for i in order]
    return Split(train=shuffled[:n_train],
                 val=shuffled[n_train:n_train + n_val],
                 test=shuffled[n_train + n_val:])


def order_label(order: int, size: int, num_classes: int) -> int:
    """Quantile bucket of a within-edge order: ceil(C * order / size) - 1."""
    return (num_classes * order - 1) // size


def generate_synthetic(num_nodes: int, num_edges: int, edge_size_range=(3, 8),
                       num_classes: int = 3, seed: int = 0,
                       skew: float = 2.5) -> tuple[Hypergraph, EdgeDependentLabels]:
    """Random hypergraph whose labels are within-edge degree-order quantiles.

    Node selection is power-law biased (weight ~ (v+1)^-skew) so degrees
    vary; the label of v in e is the ``num_classes``-quantile bucket of
    the non-strict order of deg(v) among the member degrees, divided by
    |e|.  Ties in degree share orders and therefore labels.  The default
    skew spreads degrees over several orders of magnitude, which keeps the
    within-edge rank signal sharp.
    """
    s_min, s_max = edge_size_range
    if s_min < 2:
        raise HypergraphError("minimum edge size must be >= 2")
    if s_max > num_nodes:
        raise HypergraphError("maximum edge size exceeds node count")
    if s_min > s_max:
        raise HypergraphError("empty edge size range")
    if num_classes < 2:
        raise HypergraphError("need at least 2 classes")

    rng = np.random.default_rng(seed)
    weights = (np.arange(num_nodes) + 1.0) ** -skew
    weights /= weights.sum()
    edges = []
    for _ in range(num_edges):
        size = int(rng.integers(s_min, s_max + 1))
        members = rng.choice(num_nodes, size=size, replace=False, p=weights)
        edges.append([int(v) for v in members])
    h = Hypergraph(num_nodes=num_nodes, edges=edges)

    deg = h.degrees()
    labels: list[list[int] | None] = []
    for members in h.edges:
        dvals = deg[members]
        row = []
        for dv in dvals:
            order = int(np.sum(dvals <= dv))
            row.append(order_label(order, len(members), num_classes))
        labels.append(row)
    return h, EdgeDependentLabels(num_classes=num_classes, labels=labels)
