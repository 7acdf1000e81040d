"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .rank import RankingResult
from .train import TrainReport


def training_curves(report: TrainReport, path):
    """Loss and validation-F1 curves per epoch, with the kept epoch marked."""
    epochs = [e.epoch for e in report.epochs]
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [e.train_loss for e in report.epochs], color="tab:blue")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("training loss")
    ax_f1.plot(epochs, [e.val_micro_f1 for e in report.epochs],
               label="micro-F1", color="tab:orange")
    ax_f1.plot(epochs, [e.val_macro_f1 for e in report.epochs],
               label="macro-F1", color="tab:green")
    ax_f1.axvline(report.best_epoch, color="gray", linestyle="--", linewidth=1,
                  label=f"best epoch ({report.best_epoch})")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("validation F1")
    ax_f1.set_ylim(0, 1)
    ax_f1.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def stationary_distribution(result: RankingResult, path, top: int = 50):
    """Stationary mass of the highest-ranked nodes."""
    shown = result.ranking[:top]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.16 * len(shown)), 3.2))
    ax.bar(range(len(shown)), result.stationary[shown], color="tab:blue")
    ax.set_xticks(range(len(shown)))
    ax.set_xticklabels([str(v) for v in shown], rotation=90, fontsize=6)
    ax.set_xlabel("node (rank order)")
    ax.set_ylabel("stationary probability")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
