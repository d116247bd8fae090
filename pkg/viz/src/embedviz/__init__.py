"""Scatter-plot companion for exported sentence-embedding tables."""

from .plots import GROUPINGS, panel_figure, render_scatter
from .project import project_2d
from .table import EmbeddingTable, TableError, load_table

__version__ = "0.1.0"

__all__ = [
    "EmbeddingTable", "TableError", "load_table",
    "project_2d",
    "GROUPINGS", "panel_figure", "render_scatter",
]
