"""Per-(node, hyperedge) positional encodings from within-edge centrality ranks.

The encoding of node v in hyperedge e concatenates, per centrality column,
the non-strict order of v's value among the members' values, normalized by
|e|.  Entries therefore lie in (0, 1], tied values share entries, and the
maximal member gets 1.  Only the orders matter, so any strictly monotone
rescaling of a centrality column leaves the encoding unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .centrality import CentralityMatrix
from .hypergraph import Hypergraph, HypergraphError


def order_of(value: float, values) -> int:
    """Number of elements of ``values`` (with multiplicity) <= ``value``."""
    return int(np.sum(np.asarray(values) <= value))


def rank_encoding(h: Hypergraph, v: int, e: int, cm: CentralityMatrix) -> np.ndarray:
    """Encoding vector of the pair (v, e); raises if v is not a member of e."""
    members = h.edges[e]
    if v not in members:
        raise HypergraphError(f"node {v} is not a member of hyperedge {e}")
    size = len(members)
    cols = cm.values[members]
    return np.array([order_of(cm.values[v, j], cols[:, j]) / size
                     for j in range(cm.values.shape[1])])


@dataclass
class EncodingTable:
    """Encodings for all memberships, edge-major, parallel to the flat layout."""

    h: Hypergraph
    values: np.ndarray  # (total memberships) x d_f

    def rows(self, e: int) -> np.ndarray:
        lo, hi = self.h.edge_offsets[e], self.h.edge_offsets[e + 1]
        return self.values[lo:hi]

    def pair(self, v: int, e: int) -> np.ndarray:
        return self.values[self.h.position_of(v, e)]

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


def encode_all(h: Hypergraph, cm: CentralityMatrix) -> EncodingTable:
    """Order assignment via one sort per (edge, column).

    searchsorted(sorted, x, side='right') counts members <= x exactly, so
    the result is numerically identical to element-wise ``rank_encoding``.
    """
    d_f = cm.values.shape[1]
    out = np.empty((h.total_memberships, d_f))
    for e in range(h.num_edges):
        lo, hi = h.edge_offsets[e], h.edge_offsets[e + 1]
        vals = cm.values[h.member_nodes[lo:hi]]
        size = hi - lo
        for j in range(d_f):
            col = vals[:, j]
            orders = np.searchsorted(np.sort(col), col, side="right")
            out[lo:hi, j] = orders / size
    return EncodingTable(h=h, values=out)


def write_tsv(table: EncodingTable, path):
    h = table.h
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# rank-encoding-v1\n")
        fh.write("edge\tnode\t" + "\t".join(
            f"pe{j}" for j in range(table.dim)) + "\n")
        for i in range(h.total_memberships):
            row = "\t".join(f"{x:.12g}" for x in table.values[i])
            fh.write(f"{h.member_edges[i]}\t{h.member_nodes[i]}\t{row}\n")
