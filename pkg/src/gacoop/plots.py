"""Figure rendering for the report paths. All figures go to files (Agg)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .trainer import TrainLog

STRATEGY_COLORS = {"coop": "tab:blue", "locoop": "tab:orange", "gacoop": "tab:green"}


def save_training_curves(log: TrainLog, path) -> None:
    epochs = [e.epoch for e in log.entries]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    axes[0, 0].plot(epochs, [e.l_coop for e in log.entries], color="tab:blue")
    axes[0, 0].set_ylabel("classification loss")
    axes[0, 1].plot(epochs, [e.l_ood for e in log.entries], color="tab:orange")
    axes[0, 1].set_ylabel("regularization loss")
    axes[1, 0].plot(epochs, [e.train_accuracy for e in log.entries], color="tab:green")
    axes[1, 0].set_ylabel("train accuracy")
    axes[1, 0].set_xlabel("epoch")
    axes[1, 1].plot(epochs, [e.conflict_ratio for e in log.entries], color="tab:red")
    axes[1, 1].set_ylabel("conflict ratio")
    axes[1, 1].set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_score_density(id_scores, ood_scores, path, title: str = "") -> None:
    """Overlaid ID / OOD confidence-score densities."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(
        min(np.min(id_scores), np.min(ood_scores)),
        max(np.max(id_scores), np.max(ood_scores)),
        60,
    )
    ax.hist(id_scores, bins=bins, density=True, alpha=0.6, label="ID", color="tab:blue")
    ax.hist(ood_scores, bins=bins, density=True, alpha=0.6, label="OOD", color="tab:red")
    ax.set_xlabel("ID-confidence score")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_strategy_comparison(rows: list[dict], path) -> None:
    """Grouped bars of mean fpr95 / auroc / id_acc per strategy.

    `rows` are aggregate dicts with strategy, fpr95, auroc, id_acc keys.
    """
    strategies = [r["strategy"] for r in rows]
    metrics = ("fpr95", "auroc", "id_acc")
    x = np.arange(len(metrics))
    width = 0.8 / max(len(strategies), 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, row in enumerate(rows):
        vals = [row[m] for m in metrics]
        ax.bar(
            x + i * width,
            vals,
            width,
            label=row["strategy"],
            color=STRATEGY_COLORS.get(row["strategy"]),
        )
    ax.set_xticks(x + width * (len(strategies) - 1) / 2)
    ax.set_xticklabels(["FPR95 (lower better)", "AUROC", "ID accuracy"])
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_curves(rows: list[dict], param: str, path) -> None:
    """Metric-vs-parameter lines per strategy from long-format sweep rows."""
    strategies = sorted({r["strategy"] for r in rows})
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for metric, ax in zip(("fpr95", "auroc", "id_acc"), axes):
        for strat in strategies:
            pts = sorted(
                (r["value"], r[metric]) for r in rows if r["strategy"] == strat
            )
            ax.plot(
                [p[0] for p in pts],
                [p[1] for p in pts],
                marker="o",
                label=strat,
                color=STRATEGY_COLORS.get(strat),
            )
        ax.set_xlabel(param)
        ax.set_ylabel(metric)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
