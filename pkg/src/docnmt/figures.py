"""Figure rendering for training runs and contrastive reports.

Everything goes through the Agg backend so figures can be written from
headless runs. Each function saves a PNG and returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import ContrastiveReport  # noqa: E402

__all__ = ["save_training_figure", "save_contrastive_figure"]


def save_training_figure(events: list[tuple], path: str | Path) -> Path:
    """Plot per-step loss and learning rate plus per-epoch validation perplexity."""
    steps, losses, lrs = [], [], []
    epochs, ppls = [], []
    for ev in events:
        if ev[0] == "step":
            _, step, lr, loss, _alpha = ev
            steps.append(step)
            lrs.append(lr)
            losses.append(loss)
        elif ev[0] == "epoch":
            _, epoch, ppl = ev
            epochs.append(epoch)
            ppls.append(ppl)

    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=False)
    ax_loss, ax_lr, ax_ppl = axes

    ax_loss.plot(steps, losses, lw=0.8, color="tab:blue")
    ax_loss.set_ylabel("training loss")
    ax_loss.set_xlabel("step")

    ax_lr.plot(steps, lrs, lw=0.8, color="tab:orange")
    ax_lr.set_ylabel("learning rate")
    ax_lr.set_xlabel("step")

    ax_ppl.plot(epochs, ppls, marker="o", color="tab:green")
    ax_ppl.set_ylabel("validation perplexity")
    ax_ppl.set_xlabel("epoch")

    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def save_contrastive_figure(report: ContrastiveReport, path: str | Path) -> Path:
    """Bar chart of pronoun accuracy split by pronoun, location, and distance."""
    labels = ["total"]
    values = [report.total.accuracy]
    counts = [report.total.count]
    for name, cell in sorted(report.by_pronoun.items()):
        labels.append(f"pronoun {name}")
        values.append(cell.accuracy)
        counts.append(cell.count)
    for name in ("intrasegmental", "external"):
        if name in report.by_location:
            cell = report.by_location[name]
            labels.append(name)
            values.append(cell.accuracy)
            counts.append(cell.count)
    for name in ("0", "1", "2", "3", ">3"):
        if name in report.by_distance:
            cell = report.by_distance[name]
            labels.append(f"distance {name}")
            values.append(cell.accuracy)
            counts.append(cell.count)

    fig, ax = plt.subplots(figsize=(8, 0.5 * len(labels) + 1.5))
    ypos = range(len(labels) - 1, -1, -1)
    ax.barh(list(ypos), values, color="tab:blue")
    ax.set_yticks(list(ypos))
    ax.set_yticklabels(labels)
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("accuracy")
    for y, v, c in zip(ypos, values, counts):
        ax.text(min(v + 0.01, 0.98), y, f"{v:.3f} (n={c})", va="center", fontsize=8)
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
