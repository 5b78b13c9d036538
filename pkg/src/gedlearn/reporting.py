"""Report writers: delimited outputs plus the matplotlib figures that sit
next to them."""

from __future__ import annotations

import csv
import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_json(path, payload: dict) -> None:
    """Canonical JSON: sorted keys, trailing newline, byte-stable per content."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def save_history_csv(path, history: list[dict]) -> None:
    if not history:
        return
    header = list(history[0].keys())
    write_csv(path, header, [[row.get(k, "") for k in header] for row in history])


def save_curves(history: list[dict], path, keys=None, title: str = "training") -> None:
    """Line plot of the numeric history columns over epochs."""
    if not history:
        return
    epochs = [row.get("epoch", i + 1) for i, row in enumerate(history)]
    if keys is None:
        keys = [k for k in history[0] if k != "epoch"
                and isinstance(history[0][k], (int, float))]
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in keys:
        ys = [row.get(k, float("nan")) for row in history]
        ax.plot(epochs, ys, marker="o", markersize=3, label=k)
    ax.set_xlabel("epoch")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scatter(pred, truth, path, title: str = "predicted vs exact") -> None:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(truth, pred, s=12, alpha=0.6)
    lim = [min(truth.min(), pred.min()), max(truth.max(), pred.max())]
    ax.plot(lim, lim, color="gray", linewidth=1, linestyle="--")
    ax.set_xlabel("exact GED")
    ax.set_ylabel("predicted")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_histogram(values, path, xlabel: str = "GED", bins: int = 20) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(np.asarray(values), bins=bins, color="#4292c6", edgecolor="white")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
