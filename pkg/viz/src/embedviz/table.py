"""Reading exported sentence-embedding tables.

The expected file is a TSV with a header row of
``model_tag  context_mode  sentence_index  v0 .. v{d-1}`` followed by one
row per sentence. Floats are parsed exactly as written, and row order is
preserved so projections stay aligned with the source rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["EmbeddingTable", "TableError", "load_table"]

_FIXED_COLUMNS = ("model_tag", "context_mode", "sentence_index")


class TableError(ValueError):
    """Malformed embedding table."""


@dataclass(frozen=True)
class EmbeddingTable:
    model_tags: tuple[str, ...]
    context_modes: tuple[str, ...]
    sentence_indices: tuple[int, ...]
    vectors: np.ndarray  # (n_rows, dim) float64

    def __len__(self) -> int:
        return len(self.model_tags)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def column(self, name: str) -> tuple[str, ...]:
        if name == "model_tag":
            return self.model_tags
        if name == "context_mode":
            return self.context_modes
        raise TableError(f"unknown grouping column {name!r}")


def load_table(path: str | Path) -> EmbeddingTable:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TableError(f"{path}: empty file")

    header = lines[0].split("\t")
    if tuple(header[:3]) != _FIXED_COLUMNS or len(header) < 4:
        raise TableError(
            f"{path}: line 1: expected header starting with "
            f"{' '.join(_FIXED_COLUMNS)} followed by vector columns")
    dim = len(header) - 3
    for j, name in enumerate(header[3:]):
        if name != f"v{j}":
            raise TableError(f"{path}: line 1: vector column {j} named "
                             f"{name!r}, expected 'v{j}'")

    tags: list[str] = []
    modes: list[str] = []
    indices: list[int] = []
    vectors = np.empty((len(lines) - 1, dim), dtype=np.float64)
    for row, line in enumerate(lines[1:]):
        cells = line.split("\t")
        if len(cells) != 3 + dim:
            raise TableError(f"{path}: line {row + 2}: {len(cells)} columns, "
                             f"expected {3 + dim}")
        tags.append(cells[0])
        modes.append(cells[1])
        try:
            indices.append(int(cells[2]))
            vectors[row] = [float(c) for c in cells[3:]]
        except ValueError as e:
            raise TableError(f"{path}: line {row + 2}: {e}") from None
    if not np.all(np.isfinite(vectors)):
        raise TableError(f"{path}: non-finite vector entries")
    return EmbeddingTable(tuple(tags), tuple(modes), tuple(indices), vectors)
