"""Acceptance: a 4-model, 2-mode, 30-sentence table renders to scatter
panels with the full point count and one legend entry per model, and the
projection is bit-identical across repeated runs with one seed."""

import sys

import numpy as np

from embedviz import load_table, panel_figure, project_2d
from embedviz.cli import main

from conftest import clustered_rows, write_table

TAGS = ["prev", "random", "mix", "mix-adapt"]
MODES = ["prev", "self"]


def _criterion(name, ok, detail):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}  ({detail})",
          file=sys.__stderr__, flush=True)
    assert ok, f"{name}: {detail}"


def test_scatter_acceptance(tmp_path):
    rows = clustered_rows(TAGS, MODES, 30, 16, seed=42)
    tsv = write_table(tmp_path / "table.tsv", rows, 16)

    table = load_table(tsv)
    assert len(table) == 240

    a = project_2d(table, perplexity=10.0, seed=3)
    b = project_2d(table, perplexity=10.0, seed=3)
    deterministic = np.array_equal(a, b)

    out_dir = tmp_path / "plots"
    rc = main([str(tsv), "--out-dir", str(out_dir), "--seed", "3",
               "--perplexity", "10"])
    images = sorted(out_dir.glob("scatter_*.png"))
    sizes = [p.stat().st_size for p in images]

    legends = []
    points = []
    for mode in MODES:
        fig = panel_figure(table, a, "model_tag", mode)
        ax = fig.axes[0]
        legends.append([t.get_text() for t in ax.get_legend().get_texts()])
        points.append(sum(len(c.get_offsets()) for c in ax.collections))

    ok = (rc == 0 and len(images) == 2 and all(s > 1000 for s in sizes)
          and deterministic and all(lg == TAGS for lg in legends)
          and points == [120, 120])
    _criterion(
        "viz-scatter",
        ok,
        f"cli rc={rc}, {len(images)} images sized {sizes}, "
        f"legend entries {[len(lg) for lg in legends]}, points per panel "
        f"{points}, projection deterministic {deterministic}")
