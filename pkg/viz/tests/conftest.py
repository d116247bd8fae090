import numpy as np
import pytest


def write_table(path, rows, dim):
    """rows: iterable of (model_tag, context_mode, sentence_index, vector)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = ["model_tag", "context_mode", "sentence_index"]
        header.extend(f"v{i}" for i in range(dim))
        fh.write("\t".join(header) + "\n")
        for tag, mode, idx, vec in rows:
            cells = [tag, mode, str(idx)]
            cells.extend(repr(float(x)) for x in vec)
            fh.write("\t".join(cells) + "\n")
    return path


def clustered_rows(tags, modes, n_sentences, dim, seed):
    """One Gaussian cluster per (tag, mode) group, distinct centers."""
    rng = np.random.default_rng(seed)
    rows = []
    for ti, tag in enumerate(tags):
        for mi, mode in enumerate(modes):
            center = rng.normal(0.0, 1.0, dim) * 0.5
            center[ti % dim] += 6.0
            center[(dim // 2 + mi) % dim] -= 6.0
            for s in range(n_sentences):
                vec = center + rng.normal(0.0, 0.3, dim)
                rows.append((tag, mode, s, vec))
    return rows


@pytest.fixture()
def small_table_path(tmp_path):
    rows = clustered_rows(["m1", "m2"], ["prev", "self"], 3, 4, seed=1)
    return write_table(tmp_path / "small.tsv", rows, 4)
