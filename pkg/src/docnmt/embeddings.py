"""Sentence-level representation export.

Source representations mean-pool the fused encoder output; target ones
mean-pool the final decoder layer states under teacher forcing. Rows go to
a TSV whose floats are written with full precision, so a read-back returns
exactly the values that were written.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .bpe import BOS, BpeModel
from .corpus import Document, build_context
from .model import Model

__all__ = [
    "SentenceEmbedding", "extract_source_repr", "extract_target_repr",
    "write_embeddings", "read_embeddings", "EmbeddingError",
]


class EmbeddingError(ValueError):
    """Malformed embedding table or unusable extraction input."""


@dataclass(frozen=True)
class SentenceEmbedding:
    model_tag: str
    context_mode: str
    sentence_index: int
    vector: tuple[float, ...]


def _encode_pair(model: Model, bpe: BpeModel, context: str, source: str,
                 index: int) -> tuple[list[int], list[int]]:
    max_len = model.config.max_len
    ctx = bpe.encode(context)[-max_len:]
    src = bpe.encode(source)[:max_len]
    if not src:
        raise EmbeddingError(f"sentence {index}: source tokenizes to nothing")
    if not ctx:
        ctx = list(src)
    return ctx, src


def extract_source_repr(model: Model, bpe: BpeModel, doc: Document,
                        context_mode: str, k: int, seed: int,
                        model_tag: str) -> list[SentenceEmbedding]:
    """One pooled fused-encoder vector per sentence of the document."""
    examples = build_context([doc], context_mode, k, seed)
    out: list[SentenceEmbedding] = []
    with ad.no_grad():
        for i, ex in enumerate(examples):
            ctx, src = _encode_pair(model, bpe, ex.context, ex.source, i)
            h = model.encode_fuse(ctx, src)
            vec = h.data.astype(np.float64).mean(axis=0)
            out.append(SentenceEmbedding(model_tag, context_mode, i, tuple(vec)))
    return out


def extract_target_repr(model: Model, bpe: BpeModel, doc: Document,
                        context_mode: str, k: int, seed: int,
                        model_tag: str) -> list[SentenceEmbedding]:
    """One pooled decoder-state vector per sentence, teacher-forced on the
    reference target."""
    examples = build_context([doc], context_mode, k, seed)
    max_len = model.config.max_len
    out: list[SentenceEmbedding] = []
    with ad.no_grad():
        for i, ex in enumerate(examples):
            ctx, src = _encode_pair(model, bpe, ex.context, ex.source, i)
            tgt = bpe.encode(ex.target)[:max_len - 1]
            if not tgt:
                raise EmbeddingError(f"sentence {i}: target tokenizes to nothing")
            fused, src_pad = model.forward_fused(
                np.asarray([ctx], dtype=np.int64), np.asarray([src], dtype=np.int64))
            tgt_in = np.asarray([[BOS] + tgt], dtype=np.int64)
            states = model.decoder_states(fused, src_pad, tgt_in)
            vec = states.data[0].astype(np.float64).mean(axis=0)
            out.append(SentenceEmbedding(model_tag, context_mode, i, tuple(vec)))
    return out


def write_embeddings(embeddings: Sequence[SentenceEmbedding], path: str | Path,
                     append: bool = False) -> None:
    if not embeddings:
        raise EmbeddingError("write_embeddings: nothing to write")
    dim = len(embeddings[0].vector)
    for e in embeddings:
        if len(e.vector) != dim:
            raise EmbeddingError(
                f"write_embeddings: vector length {len(e.vector)} != {dim}"
            )
    path = Path(path)
    exists = path.exists() and path.stat().st_size > 0
    mode = "a" if append and exists else "w"
    with open(path, mode, encoding="utf-8") as fh:
        if mode == "w":
            header = ["model_tag", "context_mode", "sentence_index"]
            header.extend(f"v{i}" for i in range(dim))
            fh.write("\t".join(header) + "\n")
        for e in embeddings:
            row = [e.model_tag, e.context_mode, str(e.sentence_index)]
            row.extend(repr(float(v)) for v in e.vector)
            fh.write("\t".join(row) + "\n")


def read_embeddings(path: str | Path) -> list[SentenceEmbedding]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingError(f"{path}: empty embedding table")
    header = lines[0].split("\t")
    if header[:3] != ["model_tag", "context_mode", "sentence_index"]:
        raise EmbeddingError(f"{path}: unexpected header {header[:3]}")
    dim = len(header) - 3
    if dim < 1 or header[3:] != [f"v{i}" for i in range(dim)]:
        raise EmbeddingError(f"{path}: malformed vector columns")
    out: list[SentenceEmbedding] = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 3 + dim:
            raise EmbeddingError(f"{path}: line {n}: expected {3 + dim} columns, got {len(cols)}")
        try:
            vec = tuple(float(c) for c in cols[3:])
            idx = int(cols[2])
        except ValueError as e:
            raise EmbeddingError(f"{path}: line {n}: {e}") from None
        out.append(SentenceEmbedding(cols[0], cols[1], idx, vec))
    if not out:
        raise EmbeddingError(f"{path}: no rows")
    return out
