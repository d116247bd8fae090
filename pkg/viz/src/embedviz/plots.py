"""Scatter rendering for projected embedding tables.

One image per panel. Coloring by `group_by` (model_tag or context_mode);
panels split by the other column, so the default setup draws one image per
context mode with a legend entry per model.
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .table import EmbeddingTable, TableError

__all__ = ["GROUPINGS", "panel_figure", "render_scatter"]

GROUPINGS = ("model_tag", "context_mode")

_COLORS = plt.get_cmap("tab10").colors


def _complement(group_by: str) -> str:
    if group_by not in GROUPINGS:
        raise TableError(f"unknown grouping column {group_by!r}")
    return GROUPINGS[1 - GROUPINGS.index(group_by)]


def _ordered_unique(values) -> list[str]:
    seen: dict[str, None] = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def panel_figure(table: EmbeddingTable, points: np.ndarray, group_by: str,
                 panel_value: str):
    """Build one panel: rows whose complement column equals panel_value,
    scattered in projection space and colored by the group_by column."""
    if len(table) == 0:
        raise TableError("empty point set")
    if points.shape != (len(table), 2):
        raise TableError(f"points shape {points.shape} does not match "
                         f"table of {len(table)} rows")
    panel_key = _complement(group_by)
    color_values = _ordered_unique(table.column(group_by))
    panel_col = table.column(panel_key)
    rows = [i for i, v in enumerate(panel_col) if v == panel_value]
    if not rows:
        raise TableError(f"no rows with {panel_key} == {panel_value!r}")

    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    for ci, cv in enumerate(color_values):
        idx = [i for i in rows if table.column(group_by)[i] == cv]
        if not idx:
            continue
        pts = points[idx]
        ax.scatter(pts[:, 0], pts[:, 1], s=22,
                   color=_COLORS[ci % len(_COLORS)], label=cv, alpha=0.85)
    ax.set_title(f"{panel_key} = {panel_value}")
    ax.set_xticks([])
    ax.set_yticks([])
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "_"


def render_scatter(table: EmbeddingTable, points: np.ndarray,
                   group_by: str = "model_tag", out_dir: str | Path = ".",
                   fmt: str = "png", dpi: int = 120) -> list[Path]:
    """Write one scatter image per panel. Returns the written paths."""
    if fmt not in ("png", "svg"):
        raise TableError(f"unsupported image format {fmt!r}")
    if len(table) == 0:
        raise TableError("empty point set")
    panel_key = _complement(group_by)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for value in _ordered_unique(table.column(panel_key)):
        fig = panel_figure(table, points, group_by, value)
        path = out_dir / f"scatter_{_safe(value)}.{fmt}"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)
    return written
