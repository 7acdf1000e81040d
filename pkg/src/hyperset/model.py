"""Message-passing model for edge-dependent node classification.

Each layer runs two passes.  First every hyperedge embedding is updated:
member node embeddings get the pair's rank encoding added (projected to
the embedding width), the set is adapted by stacked induced set attention,
and the previous hyperedge embedding aggregates the adapted rows through a
single-query MAB.  Then node embeddings are updated symmetrically from
their (optionally sampled) incident hyperedges, using the same per-pair
encoding.  A single-layer perceptron classifies each (node, hyperedge)
pair, either from the concatenated final embeddings or from the adapted
member rows of the final layer.

All hyperedges of equal size are processed in one grouped call, so a full
pass costs O(sum of hyperedge sizes) for fixed widths.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .attention import (
    InducedAttnParams,
    MabParams,
    induced_set_attention,
    init_induced_params,
    init_mab_params,
    mab,
    xavier,
)
from .autodiff import ParamStore, Tensor
from .centrality import COLUMNS
from .encoding import EncodingTable
from .hypergraph import Hypergraph

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    num_classes: int
    num_layers: int = 1
    hidden_dim: int = 64
    final_dim: int = 128
    heads: int = 4
    inducing_points: int = 4
    att_blocks: int = 2
    dropout: float = 0.7
    sample_size: int = 0  # 0 = use every incident hyperedge
    feature_dim: int = 64
    pe_dim: int = 4
    use_pe: bool = True
    use_within_att: bool = True
    classifier: str = "concat"  # or "intermediate"

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("need at least one layer")
        for d in self.layer_dims():
            if d % self.heads:
                raise ValueError(f"width {d} not divisible by {self.heads} heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.classifier not in ("concat", "intermediate"):
            raise ValueError(f"unknown classifier mode {self.classifier!r}")
        if self.sample_size < 0:
            raise ValueError("sample size must be >= 0")

    def layer_dims(self) -> list[int]:
        return [self.hidden_dim] * (self.num_layers - 1) + [self.final_dim]

    def pe_active(self, layer: int) -> bool:
        """Rank encodings are dropped from the last layer in intermediate mode."""
        if not self.use_pe:
            return False
        if self.classifier == "intermediate" and layer == self.num_layers - 1:
            return False
        return True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class DirectionParams:
    pe_proj: Tensor | None
    blocks: list[InducedAttnParams]
    agg: MabParams


@dataclass
class LayerParams:
    lift_x: Tensor | None
    lift_h: Tensor | None
    edge: DirectionParams
    node: DirectionParams


@dataclass
class ModelParams:
    layers: list[LayerParams]
    classifier_w: Tensor
    classifier_b: Tensor


def init_params(config: ModelConfig, seed: int) -> tuple[ParamStore, ModelParams]:
    """Xavier-uniform weights, unit LayerNorm gains, zero biases."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    layers = []
    prev = config.feature_dim
    for l, dim in enumerate(config.layer_dims()):
        lift_x = lift_h = None
        if dim != prev:
            lift_x = store.add(f"layer{l}.lift_x", xavier(rng, prev, dim))
            lift_h = store.add(f"layer{l}.lift_h", xavier(rng, prev, dim))
        dirs = {}
        for direction in ("edge", "node"):
            prefix = f"layer{l}.{direction}"
            pe_proj = None
            if config.pe_active(l):
                pe_proj = store.add(f"{prefix}.pe", xavier(rng, config.pe_dim, dim))
            blocks = []
            if config.use_within_att:
                blocks = [init_induced_params(store, f"{prefix}.blk{b}", dim,
                                              config.heads,
                                              config.inducing_points, rng)
                          for b in range(config.att_blocks)]
            agg = init_mab_params(store, f"{prefix}.agg", dim, config.heads, rng)
            dirs[direction] = DirectionParams(pe_proj=pe_proj, blocks=blocks, agg=agg)
        layers.append(LayerParams(lift_x=lift_x, lift_h=lift_h,
                                  edge=dirs["edge"], node=dirs["node"]))
        prev = dim
    cls_in = prev if config.classifier == "intermediate" else 2 * prev
    classifier_w = store.add("classifier.w", xavier(rng, cls_in, config.num_classes))
    classifier_b = store.add("classifier.b", np.zeros((1, config.num_classes)))
    return store, ModelParams(layers=layers, classifier_w=classifier_w,
                              classifier_b=classifier_b)


def parameter_count(config: ModelConfig) -> int:
    """Closed-form size of the parameter store for a given configuration."""
    def mab_count(d):
        return 3 * d * d + (2 * d * d + 2 * d) + 4 * d

    total = 0
    prev = config.feature_dim
    for l, d in enumerate(config.layer_dims()):
        if d != prev:
            total += 2 * prev * d
        per_direction = mab_count(d)
        if config.pe_active(l):
            per_direction += config.pe_dim * d
        if config.use_within_att:
            per_direction += config.att_blocks * (
                config.inducing_points * d + 2 * mab_count(d))
        total += 2 * per_direction
        prev = d
    cls_in = prev if config.classifier == "intermediate" else 2 * prev
    return total + cls_in * config.num_classes + config.num_classes


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingState:
    x: Tensor  # N x d_L
    h: Tensor  # M x d_L
    # adapted member rows of the final layer's edge pass, flat edge-major;
    # populated only when the classifier needs them
    edge_dependent: Tensor | None = None


def init_hyperedge_embeddings(h: Hypergraph, x0: np.ndarray) -> np.ndarray:
    """Mean of member node features per hyperedge."""
    out = np.zeros((h.num_edges, x0.shape[1]))
    np.add.at(out, h.member_edges, x0[h.member_nodes])
    return out / h.edge_sizes()[:, None]


def _bucket_size(n: int) -> int:
    """Round a set size up to a coarse ladder so few distinct groups remain.

    Padding waste stays below ~33%; padded rows are key-masked out of the
    attention passes, so results are unchanged.
    """
    if n <= 6:
        return n
    scale = 1
    while True:
        for base in (8, 10, 12):
            if base * scale >= n:
                return base * scale
        scale *= 2


def _edge_groups(h: Hypergraph):
    """Edges batched by padded size bucket.

    Yields (bucket, edge_ids, flat positions (g*bucket,), key mask).  The
    position array indexes both ``member_nodes`` and the encoding table;
    padding entries point at position 0 and are masked.
    """
    sizes = h.edge_sizes()
    by_bucket: dict[int, list[int]] = {}
    for e in range(h.num_edges):
        by_bucket.setdefault(_bucket_size(int(sizes[e])), []).append(e)
    groups = []
    for b in sorted(by_bucket):
        edge_ids = np.asarray(by_bucket[b], dtype=np.int64)
        starts = h.edge_offsets[edge_ids]
        idx = starts[:, None] + np.arange(b)
        valid = np.arange(b) < sizes[edge_ids][:, None]
        pos = np.where(valid, idx, 0).ravel()
        groups.append((b, edge_ids, pos, valid.ravel()))
    return groups


def sample_incidence(h: Hypergraph, sample_size: int, seed: int,
                     epoch: int) -> tuple[list[list[int]], list[list[int]]]:
    """Per-node incident hyperedges, uniformly subsampled without replacement.

    Sampling draws one random key per hyperedge from (seed, epoch) and
    keeps each node's lowest-key incident edges, so the draw is a uniform
    subset per node, is resampled every epoch, and commutes with node
    relabeling (hyperedge ids are untouched by it).
    """
    if sample_size <= 0:
        return h.incidence, h.incidence_positions
    keys = np.random.default_rng(
        np.random.SeedSequence([seed, epoch])).random(h.num_edges)
    inc_out, pos_out = [], []
    for v in range(h.num_nodes):
        inc, pos = h.incidence[v], h.incidence_positions[v]
        if len(inc) <= sample_size:
            inc_out.append(inc)
            pos_out.append(pos)
        else:
            keep = np.argsort(keys[inc], kind="stable")[:sample_size]
            keep.sort()
            inc_out.append([inc[i] for i in keep])
            pos_out.append([pos[i] for i in keep])
    return inc_out, pos_out


def _node_groups(incidence, positions, num_nodes):
    """Nodes batched by padded incident-count bucket, like ``_edge_groups``."""
    by_bucket: dict[int, list[int]] = {}
    isolated = []
    for v in range(num_nodes):
        c = len(incidence[v])
        if c == 0:
            isolated.append(v)
        else:
            by_bucket.setdefault(_bucket_size(c), []).append(v)
    groups = []
    for b in sorted(by_bucket):
        nodes = np.asarray(by_bucket[b], dtype=np.int64)
        flat_edges = np.zeros((len(nodes), b), dtype=np.int64)
        flat_pos = np.zeros((len(nodes), b), dtype=np.int64)
        valid = np.zeros((len(nodes), b), dtype=bool)
        for i, v in enumerate(nodes):
            c = len(incidence[v])
            flat_edges[i, :c] = incidence[v]
            flat_pos[i, :c] = positions[v]
            valid[i, :c] = True
        groups.append((b, nodes, flat_edges.ravel(), flat_pos.ravel(),
                       valid.ravel()))
    return groups, np.asarray(isolated, dtype=np.int64)


def _reassemble(parts: list[tuple[np.ndarray, Tensor]], total: int) -> Tensor:
    ids = np.concatenate([p[0] for p in parts])
    if ids.shape[0] != total:
        raise ValueError("reassembly does not cover every row exactly once")
    stacked = (parts[0][1] if len(parts) == 1
               else ad.concat_rows([p[1] for p in parts]))
    inverse = np.empty(total, dtype=np.int64)
    inverse[ids] = np.arange(total)
    return ad.gather_rows(stacked, inverse)


def forward(h: Hypergraph, x0: np.ndarray, pe: EncodingTable | None,
            params: ModelParams, config: ModelConfig, *, training: bool = False,
            rng: np.random.Generator | None = None, sample_seed: int = 0,
            epoch: int = 0) -> EmbeddingState:
    if x0.shape != (h.num_nodes, config.feature_dim):
        raise ValueError(f"feature matrix shape {x0.shape} does not match "
                         f"({h.num_nodes}, {config.feature_dim})")
    if config.use_pe and pe is None:
        raise ValueError("rank encodings required when use_pe is on")
    dropout = config.dropout if training else 0.0
    edge_groups = _edge_groups(h)
    sample = config.sample_size if training else 0
    incidence, positions = sample_incidence(h, sample, sample_seed, epoch)
    node_groups, isolated = _node_groups(incidence, positions, h.num_nodes)

    x_t = ad.constant(x0)
    h_t = ad.constant(init_hyperedge_embeddings(h, x0))
    capture = config.classifier == "intermediate"
    edge_dependent = None

    for l, layer in enumerate(params.layers):
        if layer.lift_x is not None:
            x_t = ad.matmul(x_t, layer.lift_x)
            h_t = ad.matmul(h_t, layer.lift_h)
        pe_on = config.pe_active(l)
        last = l == config.num_layers - 1

        # hyperedge update from member nodes
        edge_parts = []
        adapted_parts = []
        for size, edge_ids, pos, valid in edge_groups:
            mask = None if valid.all() else valid
            v_set = ad.gather_rows(x_t, h.member_nodes[pos])
            if pe_on:
                v_set = ad.add(v_set, ad.matmul(ad.constant(pe.values[pos]),
                                                layer.edge.pe_proj))
            adapted = v_set
            for block in layer.edge.blocks:
                adapted = induced_set_attention(adapted, block, set_size=size,
                                                dropout=dropout,
                                                training=training, rng=rng,
                                                key_mask=mask)
            if capture and last:
                if mask is None:
                    adapted_parts.append((pos, adapted))
                else:
                    adapted_parts.append(
                        (pos[valid], ad.gather_rows(adapted, np.nonzero(valid)[0])))
            queries = ad.gather_rows(h_t, edge_ids)
            updated = mab(queries, adapted, layer.edge.agg, nq=1, nk=size,
                          dropout=dropout, training=training, rng=rng,
                          key_mask=mask)
            edge_parts.append((edge_ids, updated))
        h_t = _reassemble(edge_parts, h.num_edges)
        if capture and last:
            edge_dependent = _reassemble(adapted_parts, h.total_memberships)

        # node update from incident hyperedges
        node_parts = []
        for count, nodes, flat_edges, flat_pos, valid in node_groups:
            mask = None if valid.all() else valid
            e_set = ad.gather_rows(h_t, flat_edges)
            if pe_on:
                e_set = ad.add(e_set, ad.matmul(ad.constant(pe.values[flat_pos]),
                                                layer.node.pe_proj))
            adapted = e_set
            for block in layer.node.blocks:
                adapted = induced_set_attention(adapted, block, set_size=count,
                                                dropout=dropout,
                                                training=training, rng=rng,
                                                key_mask=mask)
            queries = ad.gather_rows(x_t, nodes)
            updated = mab(queries, adapted, layer.node.agg, nq=1, nk=count,
                          dropout=dropout, training=training, rng=rng,
                          key_mask=mask)
            node_parts.append((nodes, updated))
        if isolated.size:
            node_parts.append((isolated, ad.gather_rows(x_t, isolated)))
        x_t = _reassemble(node_parts, h.num_nodes)

    return EmbeddingState(x=x_t, h=h_t, edge_dependent=edge_dependent)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def pair_logits(state: EmbeddingState, params: ModelParams, config: ModelConfig,
                h: Hypergraph, nodes, edges) -> Tensor:
    """Logit rows for a batch of (node, hyperedge) member pairs."""
    nodes = np.asarray(nodes, dtype=np.int64)
    edges = np.asarray(edges, dtype=np.int64)
    if config.classifier == "intermediate":
        if state.edge_dependent is None:
            raise ValueError("forward pass did not capture adapted member rows")
        pos = [h.position_of(int(v), int(e)) for v, e in zip(nodes, edges)]
        features = ad.gather_rows(state.edge_dependent, pos)
    else:
        features = ad.concat_cols(ad.gather_rows(state.x, nodes),
                                  ad.gather_rows(state.h, edges))
    return ad.broadcast_row_add(ad.matmul(features, params.classifier_w),
                                params.classifier_b)


def classify(v: int, e: int, state: EmbeddingState, params: ModelParams,
             config: ModelConfig, h: Hypergraph) -> tuple[int, np.ndarray]:
    """Predicted class (lowest-index argmax) and raw logits for one pair."""
    h.position_of(v, e)  # membership check
    logits = pair_logits(state, params, config, h, [v], [e]).data[0]
    return int(np.argmax(logits)), logits


def predict_pairs(state: EmbeddingState, params: ModelParams, config: ModelConfig,
                  h: Hypergraph, nodes, edges) -> np.ndarray:
    with ad.no_grad():
        logits = pair_logits(state, params, config, h, nodes, edges)
    return np.argmax(logits.data, axis=1)


def pair_loss(state: EmbeddingState, params: ModelParams, config: ModelConfig,
              h: Hypergraph, nodes, edges, targets) -> Tensor:
    """Mean cross-entropy over labeled (node, hyperedge) pairs."""
    return ad.cross_entropy_from_logits(
        pair_logits(state, params, config, h, nodes, edges), targets)


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def save_checkpoint(path, config: ModelConfig, store: ParamStore):
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "centrality_column_order": list(COLUMNS),
        "params": {name: {"shape": list(t.data.shape),
                          "data": t.data.reshape(-1).tolist()}
                   for name, t in store.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[ModelConfig, ParamStore, ModelParams]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version "
                         f"{payload.get('format_version')!r}")
    if payload.get("centrality_column_order") != list(COLUMNS):
        raise ValueError("checkpoint centrality column order does not match")
    config = ModelConfig.from_dict(payload["config"])
    store, params = init_params(config, seed=0)
    saved = payload["params"]
    if set(saved) != set(store.names()):
        raise ValueError("checkpoint parameter names do not match configuration")
    state = {}
    for name, entry in saved.items():
        arr = np.asarray(entry["data"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise ValueError(f"corrupt checkpoint entry {name!r}")
        state[name] = arr.reshape(shape)
    store.load_state_dict(state)  # validates every shape against the config
    return config, store, params
