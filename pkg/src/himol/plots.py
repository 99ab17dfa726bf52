"""Figures rendered alongside report files.

All plots go straight to disk via the Agg backend so the CLI works
headless. Each function returns the written path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .chem import is_valid, parse  # noqa: E402


def plot_loss_curve(history: list[float], path: str | Path, title: str) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(1, len(history) + 1), history, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_metric_bars(report: dict, path: str | Path) -> Path:
    """Percentage metrics as bars, distances annotated in the corner."""
    path = Path(path)
    names = [k for k in ("validity", "uniqueness", "novelty", "active") if report.get(k) is not None]
    values = [report[k] for k in names]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(names, values, color="#4878a8")
    ax.set_ylim(0, 105)
    ax.set_ylabel("%")
    notes = []
    if report.get("frechet") is not None:
        notes.append(f"frechet: {report['frechet']:.4g}")
    if report.get("nspdk_mmd") is not None:
        notes.append(f"nspdk mmd: {report['nspdk_mmd']:.4g}")
    if notes:
        ax.text(0.98, 0.95, "\n".join(notes), transform=ax.transAxes,
                ha="right", va="top", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_size_histogram(gen: list[str], test: list[str], path: str | Path) -> Path:
    """Heavy-atom count distributions of generated vs reference molecules."""
    path = Path(path)

    def sizes(mols):
        return [len(parse(s).atoms) for s in mols if is_valid(s)]

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(sizes(gen), bins=range(0, 40), alpha=0.6, label="generated", density=True)
    ax.hist(sizes(test), bins=range(0, 40), alpha=0.6, label="test", density=True)
    ax.set_xlabel("heavy atoms")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_delta_scatter(deltas: list[float], path: str | Path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.axhline(0.0, color="gray", lw=1)
    ax.plot(range(len(deltas)), deltas, "o")
    ax.set_xlabel("seed index")
    ax.set_ylabel("delta ROC-AUC")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
