"""Beam search with a length penalty, plus corpus translation.

Hypothesis scores are sums of per-token log-probabilities divided by the
penalty ((5 + n) / 6) ** alpha for n generated tokens. Since every future
token can only lower the raw log-probability and the penalty only grows
with length, the best active hypothesis rescored at the maximum decode
length bounds anything still reachable, which is the pruning rule. A beam
of one is plain greedy decoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .bpe import BOS, EOS, BpeModel
from .corpus import ContextExample
from .model import Model

__all__ = ["DecodeConfig", "length_penalty", "beam_search", "translate_corpus"]


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 4
    length_penalty: float = 0.6
    max_decode_len: int = 60

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if not 0.0 <= self.length_penalty <= 1.0:
            raise ValueError(f"length_penalty must be in [0, 1], got {self.length_penalty}")
        if self.max_decode_len < 1:
            raise ValueError(f"max_decode_len must be >= 1, got {self.max_decode_len}")


def length_penalty(n_tokens: int, alpha: float) -> float:
    if n_tokens < 1:
        raise ValueError(f"length_penalty: need at least one token, got {n_tokens}")
    return ((5.0 + n_tokens) / 6.0) ** alpha


def _next_log_probs(model: Model, fused, prefix: list[int]) -> np.ndarray:
    logits = model.decode_logits(fused, prefix).data[-1].astype(np.float64)
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


@dataclass(frozen=True)
class _Hyp:
    ids: tuple[int, ...]   # starts with BOS; generated tokens follow
    logprob: float

    def generated(self) -> int:
        return len(self.ids) - 1


def _search(model: Model, context_ids: Sequence[int], source_ids: Sequence[int],
            config: DecodeConfig) -> tuple[list[tuple[float, _Hyp]], list[tuple[float, _Hyp]]]:
    """Run the beam; returns (finished, active-at-exit) scored hypotheses."""
    alpha = config.length_penalty
    with ad.no_grad():
        fused = model.encode_fuse(context_ids, source_ids)
        active = [_Hyp((BOS,), 0.0)]
        finished: list[tuple[float, _Hyp]] = []
        max_steps = min(config.max_decode_len, model.config.max_len - 1)

        for _ in range(max_steps):
            candidates: list[_Hyp] = []
            for hyp in active:
                lp = _next_log_probs(model, fused, list(hyp.ids))
                order = np.argsort(-lp, kind="stable")[:config.beam_size]
                for tok in order:
                    candidates.append(_Hyp(hyp.ids + (int(tok),),
                                           hyp.logprob + float(lp[tok])))
            candidates.sort(key=lambda h: (-h.logprob, h.ids))
            active = []
            for hyp in candidates:
                if hyp.ids[-1] == EOS:
                    score = hyp.logprob / length_penalty(hyp.generated(), alpha)
                    finished.append((score, hyp))
                elif len(active) < config.beam_size:
                    active.append(hyp)
            if not active:
                break
            if finished:
                best_done = max(s for s, _ in finished)
                # most optimistic completion of anything still active
                bound = max(h.logprob for h in active) / length_penalty(max_steps, alpha)
                if bound < best_done:
                    break
        return finished, [
            (h.logprob / length_penalty(max(h.generated(), 1), alpha), h)
            for h in active
        ]


def beam_search(model: Model, context_ids: Sequence[int], source_ids: Sequence[int],
                config: DecodeConfig) -> list[int]:
    """Best-scoring token ids for one sentence (no BOS, no EOS)."""
    finished, active = _search(model, context_ids, source_ids, config)
    pool = finished if finished else active
    score, best = max(pool, key=lambda p: (p[0], p[1].ids))
    ids = list(best.ids[1:])
    if ids and ids[-1] == EOS:
        ids.pop()
    return ids


def translate_corpus(model: Model, bpe: BpeModel, examples: Sequence[ContextExample],
                     config: DecodeConfig) -> list[str]:
    """Translate each example with its own context; deterministic throughout."""
    max_len = model.config.max_len
    out: list[str] = []
    for i, ex in enumerate(examples):
        try:
            ctx = bpe.encode(ex.context)[-max_len:]
            src = bpe.encode(ex.source)[:max_len]
            if not src:
                raise ValueError("source tokenizes to nothing")
            if not ctx:
                ctx = list(src)
            ids = beam_search(model, ctx, src, config)
            out.append(bpe.decode(ids))
        except ValueError as e:
            raise ValueError(f"sentence {i}: {e}") from e
    return out
