from hyperset.hypergraph import Hypergraph
from hyperset.plots import stationary_distribution, training_curves
from hyperset.rank import stationary, uniform_weights
from hyperset.train import EpochRecord, TrainReport


def test_training_curves_renders(tmp_path):
    report = TrainReport(
        epochs=[EpochRecord(epoch=i, train_loss=1.0 / i, val_micro_f1=0.5 + 0.04 * i,
                            val_macro_f1=0.4 + 0.04 * i, seconds=0.1)
                for i in range(1, 6)],
        best_epoch=5, best_val_micro_f1=0.7, best_val_macro_f1=0.6,
        stop_reason="max_epochs", total_seconds=0.5)
    path = tmp_path / "curves.png"
    training_curves(report, path)
    assert path.stat().st_size > 1000


def test_stationary_distribution_renders(tmp_path):
    h = Hypergraph(6, [[0, 1, 2], [2, 3], [3, 4, 5]])
    result = stationary(h, uniform_weights(h))
    path = tmp_path / "pi.png"
    stationary_distribution(result, path)
    assert path.stat().st_size > 1000
