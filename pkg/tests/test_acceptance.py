"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line
per criterion.  The training-based checks take a few minutes each; the
whole module runs in roughly half an hour on one CPU core.
"""

import time

import numpy as np
import pytest

from hyperset import autodiff as ad
from hyperset import model as mdl
from hyperset.attention import init_induced_params, induced_set_attention
from hyperset.centrality import compute_all, coreness, eigenvector_centrality, pagerank
from hyperset.encoding import encode_all, rank_encoding
from hyperset.evaluate import (
    baseline_proportional,
    jsd,
    jsd_node_label_distributions,
    micro_f1,
    Predictions,
    training_label_frequencies,
)
from hyperset.features import random_features
from hyperset.hypergraph import Hypergraph, generate_synthetic, split_edges
from hyperset.model import ModelConfig, forward, init_params, load_checkpoint, pair_loss
from hyperset.rank import (
    EdgeDependentWeights,
    pairwise_accuracy,
    stationary,
    transition_matrix,
    uniform_weights,
)
from hyperset.train import TrainConfig, evaluate_split, labeled_pairs, train
from tests.test_centrality import (
    brute_force_coreness,
    dense_adjacency,
    dense_pagerank_solve,
    random_hypergraph,
)
from tests.test_rank import dense_stationary


def criterion(num, text):
    def decorate(fn):
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] criterion {num}: {text}", flush=True)
                raise
            print(f"\n[PASS] criterion {num}: {text}", flush=True)

        wrapper.__name__ = fn.__name__
        return wrapper

    return decorate


# ---------------------------------------------------------------------------
# shared synthetic benchmark (criteria 6, 7, 11)
# ---------------------------------------------------------------------------

# the benchmark model: one layer at width 64, 4 heads, 4 inducing points,
# two stacked attention blocks per direction; 2-dim random node features
# keep the input nearly uninformative so the rank encodings carry the task
BENCH_MODEL = dict(num_classes=3, num_layers=1, hidden_dim=64, final_dim=64,
                   heads=4, inducing_points=4, att_blocks=2, dropout=0.3,
                   feature_dim=2)


@pytest.fixture(scope="module")
def benchmark():
    h, labels = generate_synthetic(300, 500, (3, 8), 3, seed=7)
    pe = encode_all(h, compute_all(h))
    split = split_edges(labels.labeled_edges(), seed=7)
    return h, labels, pe, split


def train_variant(benchmark, seed, epochs, use_pe=True, use_within_att=True):
    h, labels, pe, split = benchmark
    x0 = random_features(h.num_nodes, BENCH_MODEL["feature_dim"], seed=seed).values
    config = ModelConfig(use_pe=use_pe, use_within_att=use_within_att,
                         **BENCH_MODEL)
    tc = TrainConfig(learning_rate=0.001, batch_size=64, max_epochs=epochs,
                     patience=epochs, seed=seed)
    report, store, params = train(h, labels, x0, pe, split, config, tc)
    test = evaluate_split(h, labels, x0, pe, params, config, split.test)
    return report, store, params, config, x0, test


# ---------------------------------------------------------------------------
# 1. gradient integrity
# ---------------------------------------------------------------------------

@criterion(1, "analytic gradients match finite differences (rel err < 1e-4)")
def test_criterion_1_gradient_integrity():
    start = time.perf_counter()
    h = Hypergraph(6, [[0, 1, 2], [2, 3], [3, 4, 5, 0], [1, 4]])
    pe = encode_all(h, compute_all(h))
    config = ModelConfig(num_classes=3, num_layers=1, hidden_dim=8, final_dim=8,
                         heads=2, inducing_points=2, att_blocks=2, dropout=0.0,
                         feature_dim=8)
    store, params = init_params(config, seed=11)
    x0 = np.random.default_rng(5).standard_normal((6, 8))
    nodes, edges = h.member_nodes, h.member_edges
    targets = np.arange(len(nodes)) % 3

    def loss_value():
        state = forward(h, x0, pe, params, config)
        return pair_loss(state, params, config, h, nodes, edges, targets).item()

    ad.backward(pair_loss(forward(h, x0, pe, params, config), params, config,
                          h, nodes, edges, targets))
    coord_rng = np.random.default_rng(0)
    step = 1e-5
    with ad.no_grad():
        for name, p in store.items():
            grad = p.grad
            assert grad is not None and np.any(grad != 0), name
            flat = p.data.reshape(-1)
            picks = {int(np.argmax(np.abs(grad)))}
            picks.update(int(i) for i in
                         coord_rng.integers(0, flat.size, size=5))
            for i in picks:
                orig = flat[i]
                flat[i] = orig + step
                up = loss_value()
                flat[i] = orig - step
                down = loss_value()
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                analytic = grad.reshape(-1)[i]
                err = abs(analytic - numeric) / max(1.0, abs(numeric))
                assert err < 1e-4, f"{name}[{i}]: {err:.2e}"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"gradient check took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 2. permutation equivariance of the full model
# ---------------------------------------------------------------------------

@criterion(2, "node relabeling permutes X, H, and predictions (< 1e-10)")
def test_criterion_2_permutation_equivariance():
    rng = np.random.default_rng(2024)
    for trial in range(20):
        n = int(rng.integers(8, 16))
        m = int(rng.integers(6, 18))
        h, _ = generate_synthetic(n, m, (2, min(5, n)), 3,
                                  seed=int(rng.integers(1 << 31)), skew=1.0)
        x0 = rng.standard_normal((n, 8))
        sample = int(rng.choice([0, 2]))
        config = ModelConfig(num_classes=3, num_layers=1, hidden_dim=8,
                             final_dim=8, heads=2, inducing_points=2,
                             att_blocks=2, dropout=0.0, feature_dim=8,
                             sample_size=sample)
        store, params = init_params(config, seed=int(rng.integers(1 << 31)))
        pe = encode_all(h, compute_all(h))
        base = forward(h, x0, pe, params, config, training=True,
                       rng=np.random.default_rng(0), sample_seed=3, epoch=1)
        base_pred = mdl.predict_pairs(base, params, config, h,
                                      h.member_nodes, h.member_edges)

        perm = rng.permutation(n)
        hp = Hypergraph(n, [[int(perm[v]) for v in e] for e in h.edges])
        xp = np.empty_like(x0)
        xp[perm] = x0
        pep = encode_all(hp, compute_all(hp))
        out = forward(hp, xp, pep, params, config, training=True,
                      rng=np.random.default_rng(0), sample_seed=3, epoch=1)
        assert np.max(np.abs(out.x.data[perm] - base.x.data)) < 1e-10
        assert np.max(np.abs(out.h.data - base.h.data)) < 1e-10
        out_pred = mdl.predict_pairs(out, params, config, hp,
                                     perm[h.member_nodes], h.member_edges)
        assert np.array_equal(out_pred, base_pred)


# ---------------------------------------------------------------------------
# 3. induced set attention equivariance
# ---------------------------------------------------------------------------

@criterion(3, "set attention commutes with row permutations (< 1e-12)")
def test_criterion_3_set_equivariance():
    rng = np.random.default_rng(33)
    for trial in range(100):
        dim = int(rng.choice([4, 8]))
        store = ad.ParamStore()
        params = init_induced_params(store, "isa", dim, 2,
                                     int(rng.integers(1, 5)), rng)
        n = int(rng.integers(1, 11))
        s = rng.standard_normal((n, dim))
        perm = rng.permutation(n)
        base = induced_set_attention(ad.constant(s), params).data
        out = induced_set_attention(ad.constant(s[perm]), params).data
        assert np.max(np.abs(out - base[perm])) < 1e-12


# ---------------------------------------------------------------------------
# 4. centrality oracles
# ---------------------------------------------------------------------------

@criterion(4, "coreness/eigenvector/pagerank match independent oracles")
def test_criterion_4_centrality_oracles():
    rng = np.random.default_rng(44)
    for trial in range(50):
        h = random_hypergraph(rng, n_max=12)
        np.testing.assert_array_equal(coreness(h), brute_force_coreness(h))
        ev = eigenvector_centrality(h, max_iter=5000, tol=1e-14)
        w, vecs = np.linalg.eigh(dense_adjacency(h))
        lead = vecs[:, np.argmax(w)]
        assert abs(lead @ ev) / np.linalg.norm(lead) > 1 - 1e-8
        pr = pagerank(h, beta=0.85, max_iter=20000, tol=1e-15)
        np.testing.assert_allclose(pr, dense_pagerank_solve(h, 0.85), atol=1e-8)


# ---------------------------------------------------------------------------
# 5. rank-encoding semantics
# ---------------------------------------------------------------------------

@criterion(5, "encodings: monotone-rescale invariant, singleton ones, ties")
def test_criterion_5_encoding_semantics():
    h, _ = generate_synthetic(30, 45, (2, 6), 3, seed=3)
    cm = compute_all(h)
    base = encode_all(h, cm).values
    rescaled = compute_all(h)
    rescaled.values[:] = 2.0 * rescaled.values + 1.0
    np.testing.assert_array_equal(encode_all(h, rescaled).values, base)

    single = Hypergraph(4, [[2]])
    cm_single = type(cm)(values=np.random.default_rng(0).random((4, 4)))
    np.testing.assert_array_equal(encode_all(single, cm_single).rows(0),
                                  np.ones((1, 4)))

    # constructed ties: non-strict counting gives equal members equal orders
    tied = Hypergraph(3, [[0, 1, 2]])
    cm_tied = type(cm)(values=np.array([[2.0, 0, 0, 0],
                                        [2.0, 0, 0, 0],
                                        [1.0, 0, 0, 0]]))
    enc = encode_all(tied, cm_tied)
    assert enc.pair(0, 0)[0] == enc.pair(1, 0)[0] == 1.0  # both tied at top
    assert enc.pair(2, 0)[0] == pytest.approx(1 / 3)
    assert rank_encoding(tied, 0, 0, cm_tied)[0] == 1.0


# ---------------------------------------------------------------------------
# 6. synthetic classification benchmark
# ---------------------------------------------------------------------------

@criterion(6, "synthetic benchmark reaches test micro-F1 >= 0.90 in <10 min")
def test_criterion_6_synthetic_classification(benchmark):
    h, labels, pe, split = benchmark
    start = time.perf_counter()
    report, store, params, config, x0, test = train_variant(
        benchmark, seed=7, epochs=100)
    elapsed = time.perf_counter() - start
    assert len(report.epochs) <= 100
    assert elapsed < 600.0, f"training took {elapsed:.0f}s"
    assert test["micro_f1"] >= 0.90, f"test micro-F1 {test['micro_f1']:.4f}"

    nodes, edges, targets = labeled_pairs(h, labels, split.test)
    freq = training_label_frequencies(labels, split.train, 3)
    baseline = baseline_proportional(nodes, edges, targets, freq, seed=7)
    assert abs(micro_f1(baseline) - 1 / 3) <= 0.05

    # the trained model gives the same node different labels in different
    # hyperedges, matching ground truth that does so
    predicted = mdl.predict_pairs(forward(h, x0, pe, params, config),
                                  params, config, h, nodes, edges)
    edge_dependent = False
    for v in np.unique(nodes):
        mine = nodes == v
        if len(set(targets[mine])) > 1 and len(set(predicted[mine])) > 1:
            edge_dependent = True
            break
    assert edge_dependent


# ---------------------------------------------------------------------------
# 7. ablation ordering
# ---------------------------------------------------------------------------

@criterion(7, "full model beats each ablation by >= 0.02 mean micro-F1")
def test_criterion_7_ablation_direction(benchmark):
    seeds = (0, 1, 2, 3, 4)
    scores = {"full": [], "no_pe": [], "no_watt": []}
    for seed in seeds:
        for variant in scores:
            *_, test = train_variant(
                benchmark, seed=seed, epochs=100,
                use_pe=(variant != "no_pe"),
                use_within_att=(variant != "no_watt"))
            scores[variant].append(test["micro_f1"])
    means = {k: float(np.mean(v)) for k, v in scores.items()}
    print(f"\n  ablation means: {means}", flush=True)
    assert means["full"] >= means["no_pe"] + 0.02, means
    assert means["full"] >= means["no_watt"] + 0.02, means


# ---------------------------------------------------------------------------
# 8. distribution-divergence metric
# ---------------------------------------------------------------------------

@criterion(8, "JSD: 0 on perfect, 1 on disjoint, symmetric and bounded")
def test_criterion_8_jsd_metric():
    perfect = Predictions(nodes=[0, 1, 2], edges=[0, 1, 2],
                          true_labels=[0, 1, 2], predicted=[0, 1, 2],
                          num_classes=3)
    assert jsd_node_label_distributions(perfect, 3) == 0.0

    disjoint = Predictions(nodes=[5], edges=[0], true_labels=[0],
                           predicted=[1], num_classes=2)
    assert jsd_node_label_distributions(disjoint, 2) == pytest.approx(1.0)

    rng = np.random.default_rng(8)
    for _ in range(1000):
        c = int(rng.integers(2, 7))
        p = rng.dirichlet(np.ones(c))
        q = rng.dirichlet(np.ones(c))
        d = jsd(p, q)
        assert 0.0 <= d <= 1.0 + 1e-12
        assert abs(d - jsd(q, p)) < 1e-12


# ---------------------------------------------------------------------------
# 9. ranking aggregation
# ---------------------------------------------------------------------------

@criterion(9, "stationary matches dense oracle; score weights rank perfectly")
def test_criterion_9_ranking_aggregation():
    rng = np.random.default_rng(99)
    done = 0
    while done < 20:
        n = int(rng.integers(3, 11))
        m = int(rng.integers(2, 2 * n))
        edges = []
        for _ in range(m):
            size = int(rng.integers(2, min(n, 5) + 1))
            edges.append([int(v) for v in rng.choice(n, size, replace=False)])
        h = Hypergraph(n, edges)
        w = EdgeDependentWeights(values=rng.uniform(0.5, 3.0,
                                                    h.total_memberships))
        result = stationary(h, w, alpha=0.0, tol=1e-14)
        oracle = dense_stationary(transition_matrix(h, w), result.alpha_used,
                                  h.degrees() > 0)
        np.testing.assert_allclose(result.stationary, oracle, atol=1e-8)
        done += 1

    # 5 nodes; node ids order both ground-truth score and structural weight
    scores = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
    h5 = Hypergraph(5, [[0, 1, 2], [0, 1, 3], [0, 2, 4], [0, 1, 2, 3, 4],
                        [1, 2, 3], [0, 3, 4]])
    gamma = EdgeDependentWeights(values=scores[h5.member_nodes])
    result = stationary(h5, gamma, tol=1e-14)
    assert pairwise_accuracy(result, scores) == 1.0

    # all-equal weights reduce exactly to the unweighted hypergraph walk
    h3 = Hypergraph(5, [[0, 1, 2], [2, 3], [3, 4, 0]])
    uniform = transition_matrix(h3, uniform_weights(h3))
    unweighted = np.zeros((5, 5))
    for v in range(5):
        for e in h3.incidence[v]:
            for u in h3.edges[e]:
                unweighted[v, u] += 1.0 / (len(h3.incidence[v]) * len(h3.edges[e]))
    np.testing.assert_array_equal(uniform, unweighted)


# ---------------------------------------------------------------------------
# 10. wall-time linearity
# ---------------------------------------------------------------------------

@criterion(10, "doubling total memberships scales epoch time by 1.5x-2.5x")
def test_criterion_10_linearity():
    def one_epoch_time(n, m):
        h, labels = generate_synthetic(n, m, (3, 8), 3, seed=1, skew=0.8)
        pe = encode_all(h, compute_all(h))
        config = ModelConfig(num_classes=3, num_layers=1, hidden_dim=64,
                             final_dim=64, heads=4, inducing_points=4,
                             att_blocks=2, dropout=0.3, feature_dim=64)
        store, params = init_params(config, seed=0)
        x0 = random_features(n, 64, seed=0).values
        split = split_edges(labels.labeled_edges(), seed=0)
        nodes, edges, targets = labeled_pairs(h, labels, split.train)

        def epoch(k):
            state = forward(h, x0, pe, params, config, training=True,
                            rng=np.random.default_rng(k), sample_seed=0,
                            epoch=k)
            loss = pair_loss(state, params, config, h, nodes, edges, targets)
            store.zero_grads()
            ad.backward(loss)
            ad.adam_step(store, lr=0.001)
            with ad.no_grad():
                forward(h, x0, pe, params, config)

        epoch(0)  # warm-up
        times = []
        for rep in range(3):
            t0 = time.perf_counter()
            epoch(rep + 1)
            times.append(time.perf_counter() - t0)
        return min(times), h.total_memberships

    t1, s1 = one_epoch_time(500, 1000)
    t2, s2 = one_epoch_time(1000, 2000)
    t3, s3 = one_epoch_time(2000, 4000)
    print(f"\n  sizes {s1}/{s2}/{s3}, times {t1:.2f}/{t2:.2f}/{t3:.2f}s",
          flush=True)
    assert 1.8 < s2 / s1 < 2.2 and 1.8 < s3 / s2 < 2.2
    assert 1.5 <= t2 / t1 <= 2.5, f"ratio {t2 / t1:.2f}"
    assert 1.5 <= t3 / t2 <= 2.5, f"ratio {t3 / t2:.2f}"


# ---------------------------------------------------------------------------
# 11. determinism and checkpoint round-trip
# ---------------------------------------------------------------------------

@criterion(11, "seeded reruns reproduce reports; checkpoints reload exactly")
def test_criterion_11_determinism(benchmark, tmp_path):
    h, labels, pe, split = benchmark
    x0 = random_features(h.num_nodes, 8, seed=0).values
    config = ModelConfig(**BENCH_MODEL)
    tc = TrainConfig(learning_rate=0.001, batch_size=64, max_epochs=5,
                     patience=5, seed=0)
    ckpt = tmp_path / "model.json"
    first, store, params = train(h, labels, x0, pe, split, config, tc,
                                 checkpoint_path=ckpt)
    second, _, _ = train(h, labels, x0, pe, split, config, tc)
    assert first.semantic_dict() == second.semantic_dict()

    config2, store2, params2 = load_checkpoint(ckpt)
    metrics = evaluate_split(h, labels, x0, pe, params2, config2, split.val)
    assert metrics["micro_f1"] == first.best_val_micro_f1
    assert metrics["macro_f1"] == first.best_val_macro_f1
