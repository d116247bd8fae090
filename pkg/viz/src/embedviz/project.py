"""2-D projection of embedding tables."""

from __future__ import annotations

import numpy as np
from sklearn.manifold import TSNE

from .table import EmbeddingTable, TableError

__all__ = ["project_2d"]


def project_2d(table: EmbeddingTable, perplexity: float = 10.0,
               seed: int = 0) -> np.ndarray:
    """t-SNE the whole table into (n_rows, 2) coordinates.

    The projection is run once over every row so that panels rendered from
    subsets of the result share one coordinate space.

    PCA initialization plus the exact gradient make the fit deterministic
    outright, so any seed reproduces itself (the seed is still threaded
    through for sklearn's randomized code paths). The choice also pins a
    useful symmetry: identical input rows start at identical coordinates
    and receive identical forces at every step, so duplicates stay
    coincident instead of being scattered by a randomized start or by
    tree-approximation artifacts. Tables are per-document exports of at
    most a few hundred rows, so the exact method's quadratic cost does
    not matter.
    """
    n = len(table)
    if n < 2:
        raise TableError(f"projection needs at least 2 rows, table has {n}")
    if not perplexity > 0:
        raise TableError(f"perplexity must be positive, got {perplexity}")
    if perplexity >= n:
        raise TableError(
            f"perplexity {perplexity} must be below the row count {n}")
    tsne = TSNE(n_components=2, perplexity=perplexity, init="pca",
                method="exact", random_state=seed)
    return np.asarray(tsne.fit_transform(table.vectors), dtype=np.float64)
