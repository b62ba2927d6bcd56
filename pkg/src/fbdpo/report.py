"""Figure rendering for evaluation reports and training logs.

Every report path drops a PNG next to its delimited output: a metric
bar chart beside the eval JSONL, and loss/margin curves beside the
training CSV. Rendering is headless (Agg) so it works anywhere.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .evaluation import MetricReport  # noqa: E402
from .trainer import StepLog  # noqa: E402


def render_metric_figure(report: MetricReport, path: str | Path) -> None:
    """Bar chart of the fraction-valued metrics; absent metrics are skipped."""
    metrics = [
        ("accuracy", report.accuracy),
        ("ack_rate", report.ack_rate),
        ("fpr", report.fpr),
        ("calib_f1", report.calib_f1),
    ]
    present = [(name, value) for name, value in metrics if value is not None]
    names = [name for name, _ in present]
    values = [value for _, value in present]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(names, values, color="#4878a8", width=0.6)
    for bar, value in zip(bars, values):
        ax.annotate(f"{value:.3f}", xy=(bar.get_x() + bar.get_width() / 2, value),
                    xytext=(0, 3), textcoords="offset points",
                    ha="center", va="bottom", fontsize=9)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("fraction")
    ax.set_title(f"verification calibration over {report.n} records "
                 f"({report.n_right} right / {report.n_wrong} wrong)")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_training_figure(logs: Sequence[StepLog], path: str | Path) -> None:
    """Loss and reward-margin curves over optimizer steps."""
    steps = [row.step for row in logs]
    fig, (ax_loss, ax_margin) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_loss.plot(steps, [row.loss for row in logs], color="#4878a8", lw=1.5)
    ax_loss.set_ylabel("weighted loss")
    ax_loss.grid(alpha=0.3)
    ax_margin.plot(steps, [row.mean_reward_margin for row in logs],
                   color="#a85448", lw=1.5)
    ax_margin.axhline(0.0, color="gray", lw=0.8, ls="--")
    ax_margin.set_ylabel("reward margin")
    ax_margin.set_xlabel("optimizer step")
    ax_margin.grid(alpha=0.3)
    fig.suptitle("preference training progress")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
