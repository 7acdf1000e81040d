"""Node centralities on the clique expansion, via the incidence structure.

All four measures run in O(sum of hyperedge sizes) per iteration.  The
clique-expansion adjacency A = I I^T (co-membership counts, diagonal
included) is never materialized: both power iterations apply it through
two incidence passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypergraph import Hypergraph

COLUMNS = ("degree", "eigenvector", "pagerank", "coreness")


class CentralityError(ValueError):
    pass


@dataclass
class CentralityMatrix:
    """N x 4 matrix, columns fixed as (degree, eigenvector, pagerank, coreness)."""

    values: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COLUMNS.index(name)]


def degree_centrality(h: Hypergraph) -> np.ndarray:
    return h.degrees().astype(np.float64)


def coreness(h: Hypergraph) -> np.ndarray:
    """Max k at which each node survives iterative peeling.

    Peeling at level k repeatedly removes nodes of current degree < k;
    removing a node deletes every hyperedge containing it.  Computed in a
    single bucket pass: nodes are bin-sorted by degree, popped in
    increasing current-degree order, and each deleted membership moves
    its node down one bin, so the total work is O(sum of edge sizes).
    """
    n = h.num_nodes
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    deg = h.degrees().copy()
    max_deg = int(deg.max(initial=0))

    # bin layout: vert holds nodes sorted by current degree, pos[v] is the
    # index of v in vert, bin_start[d] the first index of degree-d nodes
    counts = np.bincount(deg, minlength=max_deg + 2)
    bin_start = np.zeros(max_deg + 2, dtype=np.int64)
    np.cumsum(counts[:-1], out=bin_start[1:])
    fill = bin_start.copy()
    vert = np.empty(n, dtype=np.int64)
    pos = np.empty(n, dtype=np.int64)
    for v in range(n):
        d = deg[v]
        vert[fill[d]] = v
        pos[v] = fill[d]
        fill[d] += 1

    edge_alive = np.ones(h.num_edges, dtype=bool)
    core = np.zeros(n, dtype=np.int64)
    k = 0
    for i in range(n):
        v = int(vert[i])
        if deg[v] > k:
            k = int(deg[v])
        core[v] = k
        for e in h.incidence[v]:
            if not edge_alive[e]:
                continue
            edge_alive[e] = False
            for u in h.edges[e]:
                if u == v or deg[u] <= k:
                    continue
                # swap u with the first node of its bin, then shrink the bin
                du = deg[u]
                pu = pos[u]
                pw = bin_start[du]
                w = vert[pw]
                if u != w:
                    vert[pu], vert[pw] = w, u
                    pos[u], pos[w] = pw, pu
                bin_start[du] += 1
                deg[u] = du - 1
    return core


def _incidence_matvec(h: Hypergraph, x: np.ndarray) -> np.ndarray:
    """A @ x with A = I I^T, applied as two incidence passes."""
    y = np.bincount(h.member_edges, weights=x[h.member_nodes],
                    minlength=h.num_edges)
    return np.bincount(h.member_nodes, weights=y[h.member_edges],
                       minlength=h.num_nodes)


def eigenvector_centrality(h: Hypergraph, max_iter: int = 100,
                           tol: float = 1e-10) -> np.ndarray:
    """Power iteration x <- A x, renormalized to unit 2-norm each step."""
    if h.num_edges == 0:
        raise CentralityError("eigenvector centrality of an edgeless hypergraph")
    x = np.full(h.num_nodes, 1.0 / np.sqrt(h.num_nodes))
    for _ in range(max_iter):
        z = _incidence_matvec(h, x)
        norm = np.linalg.norm(z)
        if norm == 0.0:
            raise CentralityError("zero operator in eigenvector iteration")
        z /= norm
        if np.max(np.abs(z - x)) < tol:
            return z
        x = z
    return x


def pagerank(h: Hypergraph, beta: float = 0.85, max_iter: int = 100,
             tol: float = 1e-10) -> np.ndarray:
    """Damped PageRank on the row-stochastic transition P = D^-1 A.

    r <- beta P^T r + (1 - beta)/N, computed implicitly; dangling nodes
    (zero row sum, i.e. isolated nodes) teleport uniformly.  The result
    sums to 1.
    """
    if h.num_edges == 0:
        raise CentralityError("pagerank of an edgeless hypergraph")
    if not 0.0 < beta < 1.0:
        raise CentralityError(f"damping factor must be in (0, 1), got {beta}")
    n = h.num_nodes
    sizes = h.edge_sizes().astype(np.float64)
    # row sum of A at v is the total size of hyperedges containing v
    row_sum = np.bincount(h.member_nodes, weights=sizes[h.member_edges],
                          minlength=n)
    dangling = row_sum == 0.0
    safe = np.where(dangling, 1.0, row_sum)
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        z = np.where(dangling, 0.0, r / safe)
        spread = _incidence_matvec(h, z)
        dangling_mass = float(r[dangling].sum())
        r_new = beta * spread + (beta * dangling_mass + (1.0 - beta)) / n
        if np.abs(r_new - r).sum() < tol:
            r = r_new
            break
        r = r_new
    return r / r.sum()


def compute_all(h: Hypergraph, beta: float = 0.85, max_iter: int = 100,
                tol: float = 1e-10) -> CentralityMatrix:
    values = np.column_stack([
        degree_centrality(h),
        eigenvector_centrality(h, max_iter=max_iter, tol=tol),
        pagerank(h, beta=beta, max_iter=max_iter, tol=tol),
        coreness(h).astype(np.float64),
    ])
    return CentralityMatrix(values=values)


def write_tsv(cm: CentralityMatrix, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# centrality-v1\n")
        fh.write("node\t" + "\t".join(COLUMNS) + "\n")
        for v, row in enumerate(cm.values):
            fh.write(f"{v}\t" + "\t".join(f"{x:.12g}" for x in row) + "\n")
