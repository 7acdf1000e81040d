import numpy as np
import pytest

from hyperset.centrality import compute_all
from hyperset.encoding import encode_all
from hyperset.evaluate import micro_f1
from hyperset.features import random_features
from hyperset.hypergraph import generate_synthetic, split_edges
from hyperset.model import ModelConfig, load_checkpoint
from hyperset.train import (
    TrainConfig,
    TrainReport,
    TrainingDiverged,
    evaluate_split,
    grid_search,
    labeled_pairs,
    predict_edge_set,
    train,
)


@pytest.fixture(scope="module")
def small_problem():
    h, labels = generate_synthetic(40, 60, (3, 6), 3, seed=13)
    pe = encode_all(h, compute_all(h))
    x0 = random_features(h.num_nodes, 16, seed=1).values
    split = split_edges(labels.labeled_edges(), seed=2)
    config = ModelConfig(num_classes=3, num_layers=1, hidden_dim=16,
                         final_dim=16, heads=2, inducing_points=2,
                         att_blocks=2, dropout=0.1, feature_dim=16)
    return h, labels, pe, x0, split, config


def quick_train_config(**overrides):
    defaults = dict(learning_rate=0.005, batch_size=16, max_epochs=6,
                    patience=25, seed=3)
    defaults.update(overrides)
    return TrainConfig(**defaults)


def test_labeled_pairs_collects_members(small_problem):
    h, labels, *_ = small_problem
    nodes, edges, targets = labeled_pairs(h, labels, [0, 1])
    assert len(nodes) == len(h.edges[0]) + len(h.edges[1])
    assert list(targets[:len(h.edges[0])]) == labels.labels[0]


def test_training_reduces_loss(small_problem):
    h, labels, pe, x0, split, config = small_problem
    report, store, params = train(h, labels, x0, pe, split, config,
                                  quick_train_config())
    assert report.epochs[-1].train_loss < report.epochs[0].train_loss


def test_train_determinism(small_problem):
    h, labels, pe, x0, split, config = small_problem
    a, _, _ = train(h, labels, x0, pe, split, config, quick_train_config())
    b, _, _ = train(h, labels, x0, pe, split, config, quick_train_config())
    assert a.semantic_dict() == b.semantic_dict()


def test_best_epoch_dominates(small_problem):
    h, labels, pe, x0, split, config = small_problem
    report, _, _ = train(h, labels, x0, pe, split, config, quick_train_config())
    best = max(e.val_micro_f1 for e in report.epochs)
    assert report.best_val_micro_f1 == best
    assert report.epochs[report.best_epoch - 1].val_micro_f1 == best


def test_patience_zero_stops_at_first_non_improvement(small_problem):
    h, labels, pe, x0, split, config = small_problem
    report, _, _ = train(h, labels, x0, pe, split, config,
                         quick_train_config(max_epochs=40, patience=0))
    if report.stop_reason == "patience":
        assert len(report.epochs) == report.best_epoch + 1


def test_empty_train_split_rejected(small_problem):
    h, labels, pe, x0, split, config = small_problem
    empty = split_edges([], seed=0)
    with pytest.raises(ValueError, match="empty"):
        train(h, labels, x0, pe, empty, config, quick_train_config())


def test_checkpoint_reproduces_validation_metrics(tmp_path, small_problem):
    h, labels, pe, x0, split, config = small_problem
    ckpt = tmp_path / "model.json"
    report, store, params = train(h, labels, x0, pe, split, config,
                                  quick_train_config(), checkpoint_path=ckpt)
    config2, store2, params2 = load_checkpoint(ckpt)
    preds = predict_edge_set(h, labels, x0, pe, params2, config2, split.val)
    assert micro_f1(preds) == report.best_val_micro_f1


def test_report_json_roundtrip(tmp_path, small_problem):
    h, labels, pe, x0, split, config = small_problem
    report, _, _ = train(h, labels, x0, pe, split, config, quick_train_config())
    path = tmp_path / "report.json"
    report.save(path)
    loaded = TrainReport.load(path)
    assert loaded.to_dict() == report.to_dict()


def test_loss_invariant_to_pair_order(small_problem):
    from hyperset import autodiff as ad
    from hyperset.model import forward, init_params, pair_loss

    h, labels, pe, x0, split, config = small_problem
    store, params = init_params(config, seed=0)
    nodes, edges, targets = labeled_pairs(h, labels, split.train[:8])
    with ad.no_grad():
        state = forward(h, x0, pe, params, config)
        base = pair_loss(state, params, config, h, nodes, edges, targets).item()
        perm = np.random.default_rng(0).permutation(len(nodes))
        shuffled = pair_loss(state, params, config, h, nodes[perm],
                             edges[perm], targets[perm]).item()
    assert shuffled == pytest.approx(base, abs=1e-12)


def test_evaluate_split_keys(small_problem):
    h, labels, pe, x0, split, config = small_problem
    from hyperset.model import init_params

    _, params = init_params(config, seed=0)
    metrics = evaluate_split(h, labels, x0, pe, params, config, split.val)
    assert set(metrics) == {"micro_f1", "macro_f1", "avg_jsd", "num_pairs"}
    assert 0 <= metrics["micro_f1"] <= 1
    assert 0 <= metrics["avg_jsd"] <= 1


def test_grid_search_single_point_equals_train(small_problem):
    h, labels, pe, x0, split, config = small_problem
    base = quick_train_config()
    result = grid_search(h, labels, x0, pe, split, config,
                         learning_rates=[base.learning_rate],
                         batch_sizes=[base.batch_size],
                         base_train_config=base)
    direct, _, _ = train(h, labels, x0, pe, split, config, base)
    assert result.report.semantic_dict() == direct.semantic_dict()
    assert result.best_index == 0


def test_grid_search_selects_max_mean_f1(small_problem):
    h, labels, pe, x0, split, config = small_problem
    result = grid_search(h, labels, x0, pe, split, config,
                         learning_rates=[0.005, 0.0001],
                         batch_sizes=[16],
                         base_train_config=quick_train_config(max_epochs=4))
    selections = [c["val_selection"] for c in result.combos]
    assert selections[result.best_index] == max(selections)
    assert "micro_f1" in result.test_metrics


def test_grid_search_rejects_empty_grid(small_problem):
    h, labels, pe, x0, split, config = small_problem
    with pytest.raises(ValueError):
        grid_search(h, labels, x0, pe, split, config, [], [64],
                    base_train_config=quick_train_config())


def test_divergence_aborts_with_diagnostic(small_problem):
    # layer normalization keeps moderate blow-ups finite, so divergence
    # needs steps big enough that squared activations overflow float64
    h, labels, pe, x0, split, config = small_problem
    with np.errstate(over="ignore", invalid="ignore"), \
            pytest.raises(TrainingDiverged, match="epoch"):
        train(h, labels, x0, pe, split, config,
              quick_train_config(learning_rate=1e200, max_epochs=30))


def test_intermediate_classifier_predicts_edge_dependently(small_problem):
    """Adapted member rows separate the same node's labels across hyperedges."""
    from hyperset.model import ModelConfig

    h, labels, pe, x0, split, config = small_problem
    im_config = ModelConfig(**{**config.to_dict(), "classifier": "intermediate"})
    report, store, params = train(h, labels, x0, pe, split, im_config,
                                  quick_train_config(max_epochs=25))
    preds = predict_edge_set(h, labels, x0, pe, params, im_config, split.train)
    found = False
    for v in np.unique(preds.nodes):
        mine = preds.nodes == v
        if len(set(preds.true_labels[mine])) > 1 and \
                len(set(preds.predicted[mine])) > 1:
            found = True
            break
    assert found, "no node received edge-dependent predictions"
