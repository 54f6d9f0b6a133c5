"""Figures for parameter sweeps (written next to the CSV)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}
MARKERS = ("o", "s", "^", "v", "D")


def figsize(width_in: float = 4.0) -> tuple[float, float]:
    return width_in, width_in * GOLDEN


def _numeric(values):
    out = []
    for v in values:
        try:
            out.append(float(v))
        except (TypeError, ValueError):
            out.append(float("nan"))
    return out


def plot_sweep(rows: list[dict], param: str, columns: list[str], path, title: str | None = None):
    """One line per column against the swept parameter; returns the path."""
    x = _numeric(r["value"] for r in rows)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        for i, col in enumerate(columns):
            y = _numeric(r.get(col) for r in rows)
            ax.plot(x, y, marker=MARKERS[i % len(MARKERS)], ms=4, lw=1.2, label=col)
        ax.set_xlabel(param)
        ax.set_ylabel("energy")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
