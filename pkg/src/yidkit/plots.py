"""Figure rendering for report outputs.

Every function writes a PNG next to the delimited report files; the Agg
backend keeps rendering headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_fold_accuracy(results: dict[str, list], path) -> None:
    """Validation and test accuracy per fold, one line pair per configuration."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name in sorted(results):
        rows = sorted(results[name], key=lambda r: r.fold)
        folds = [r.fold for r in rows]
        ax.plot(folds, [r.val_accuracy for r in rows], marker="o",
                label=f"{name} (val)")
        ax.plot(folds, [r.test_accuracy for r in rows], marker="s",
                linestyle="--", label=f"{name} (test)")
    ax.set_xlabel("fold")
    ax.set_ylabel("token accuracy (%)")
    ax.set_title("Accuracy per fold")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_tag_f1(scores: dict, path, max_tags: int = 30) -> None:
    """Horizontal bars of per-tag F1, most frequent gold tags first."""
    rows = [(t, s) for t, s in scores.items() if s.gold_count > 0]
    rows.sort(key=lambda kv: (-kv[1].gold_count, kv[0]))
    rows = rows[:max_tags]
    tags = [t for t, _ in rows]
    f1s = [0.0 if s.f1 is None else s.f1 for _, s in rows]
    fig, ax = plt.subplots(figsize=(7, max(3, 0.25 * len(rows) + 1)))
    ax.barh(range(len(rows)), f1s)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(tags, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("F1 (%)")
    ax.set_title("Per-tag F1 (most frequent tags)")
    ax.set_xlim(0, 100)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_training_history(rows: list[dict], path) -> None:
    """Training loss and validation accuracy across epochs."""
    epochs = [r["epoch"] for r in rows]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(epochs, [r["train_nll"] for r in rows], color="tab:red", marker=".")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("mean train NLL", color="tab:red")
    ax1.tick_params(axis="y", labelcolor="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [r["val_accuracy"] * 100 for r in rows], color="tab:blue", marker=".")
    ax2.set_ylabel("validation accuracy (%)", color="tab:blue")
    ax2.tick_params(axis="y", labelcolor="tab:blue")
    ax1.set_title("Training history")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_embedding_loss(history: list[float], path) -> None:
    """Weighted least-squares loss per embedding training iteration."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(1, len(history) + 1), history, marker=".")
    ax.set_xlabel("iteration")
    ax.set_ylabel("weighted loss")
    ax.set_yscale("log")
    ax.set_title("Embedding training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
