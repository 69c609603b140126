"""Report figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import OverlapBin  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def plot_overlap(series: Mapping[str, Sequence[OverlapBin]], path) -> Path:
    """MRR per overlap-granularity bin, one line per model."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 2.8))
        for label, bins in series.items():
            ax.plot([b.bin for b in bins], [b.mrr for b in bins], marker="o", ms=3, label=label)
        first = next(iter(series.values()))
        ax.set_xticks([b.bin for b in first])
        ax.set_xlabel("overlap granularity group (short to long)")
        ax.set_ylabel("MRR")
        ax.grid(True, alpha=0.3)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path


def plot_training_curve(history: Sequence[dict], path) -> Path:
    """Training loss and (when available) dev MRR per epoch."""
    path = Path(path)
    epochs = [h["epoch"] for h in history]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 2.8))
        ax.plot(epochs, [h["loss"] for h in history], color="C0", label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss per pair", color="C0")
        if any(h.get("dev_mrr") is not None for h in history):
            ax2 = ax.twinx()
            ax2.plot(epochs, [h["dev_mrr"] for h in history], color="C1", label="dev MRR")
            ax2.set_ylabel("dev MRR", color="C1")
            ax2.set_ylim(0, 1)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path
