"""Static figures written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

FIGSIZE = (5.0, 3.2)


def _style(ax, xlabel: str, ylabel: str, title: str) -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)


def histogram_figure(edges, counts, path, xlabel: str = "value", title: str = "",
                     marker: float | None = None) -> Path:
    """Bar chart of a precomputed histogram; the format follows the file suffix (SVG by default)."""
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts)
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    widths = np.diff(edges)
    if np.all(widths == 0):
        widths = np.full_like(widths, 1.0)
    ax.bar(edges[:-1], counts, width=widths, align="edge", color="#4878a8", edgecolor="white", linewidth=0.5)
    if marker is not None:
        ax.axvline(marker, color="#c44e52", linestyle="--", linewidth=1)
    _style(ax, xlabel, "count", title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg")
    return path
