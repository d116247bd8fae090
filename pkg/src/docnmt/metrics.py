"""Translation metrics: corpus BLEU and contrastive pronoun accuracy.

BLEU follows the mteval-13a recipe: its tokenizer, exponential smoothing
for zero n-gram matches, no effective-order fallback (a candidate shorter
than four tokens scores zero), and the standard brevity penalty. Stats are
additive so corpus scores can be assembled per segment or per document.

The contrastive harness scores each candidate translation teacher-forced
and picks the highest total log-probability; ties count as wrong.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .bpe import BOS, EOS, PAD, BpeModel
from .corpus import ContrastiveInstance
from .model import Model

__all__ = [
    "tokenize_13a", "BleuStats", "bleu_stats", "bleu_score_from_stats",
    "bleu", "doc_bleu",
    "InstanceResult", "score_contrastive_instance", "evaluate_contrastive",
    "ContrastiveReport", "aggregate_contrastive", "majority_class_rate",
    "format_report_table", "DISTANCE_BUCKETS",
]

MAX_ORDER = 4

_UNESCAPES = (("&quot;", '"'), ("&amp;", "&"), ("&lt;", "<"), ("&gt;", ">"))
_RE_PUNCT = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
_RE_PERIOD_BEFORE = re.compile(r"([^0-9])([\.,])")
_RE_PERIOD_AFTER = re.compile(r"([\.,])([^0-9])")
_RE_DIGIT_DASH = re.compile(r"([0-9])(-)")
_RE_SPACES = re.compile(r"\s+")


def tokenize_13a(line: str) -> list[str]:
    norm = line.replace("<skipped>", "").replace("\n", " ")
    for esc, plain in _UNESCAPES:
        norm = norm.replace(esc, plain)
    norm = f" {norm} "
    norm = _RE_PUNCT.sub(r" \1 ", norm)
    norm = _RE_PERIOD_BEFORE.sub(r"\1 \2 ", norm)
    norm = _RE_PERIOD_AFTER.sub(r" \1 \2", norm)
    norm = _RE_DIGIT_DASH.sub(r"\1 \2 ", norm)
    norm = _RE_SPACES.sub(" ", norm).strip()
    return norm.split(" ") if norm else []


@dataclass
class BleuStats:
    matches: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    cand_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.cand_len + other.cand_len,
            self.ref_len + other.ref_len,
        )

    def __radd__(self, other):
        return self if other == 0 else self.__add__(other)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(candidate: str, reference: str) -> BleuStats:
    cand = tokenize_13a(candidate)
    ref = tokenize_13a(reference)
    stats = BleuStats(cand_len=len(cand), ref_len=len(ref))
    for n in range(1, MAX_ORDER + 1):
        total = max(0, len(cand) - n + 1)
        stats.totals[n - 1] = total
        if total == 0:
            continue
        cand_counts = _ngrams(cand, n)
        ref_counts = _ngrams(ref, n)
        stats.matches[n - 1] = sum(
            min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items()
        )
    return stats


def bleu_score_from_stats(stats: BleuStats) -> float:
    if stats.cand_len == 0:
        return 0.0
    log_sum = 0.0
    smooth = 1.0
    for n in range(MAX_ORDER):
        if stats.totals[n] == 0:
            # no n-grams of this order at all; without an effective-order
            # fallback the geometric mean hits zero
            return 0.0
        if stats.matches[n] == 0:
            smooth *= 2.0
            p = 1.0 / (smooth * stats.totals[n])
        else:
            p = stats.matches[n] / stats.totals[n]
        log_sum += math.log(p)
    if stats.cand_len >= stats.ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - stats.ref_len / stats.cand_len)
    return 100.0 * bp * math.exp(log_sum / MAX_ORDER)


def bleu(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Corpus-level sentence BLEU over aligned candidate/reference lines."""
    if len(candidates) != len(references):
        raise ValueError(
            f"bleu: {len(candidates)} candidates vs {len(references)} references"
        )
    if not candidates:
        raise ValueError("bleu: empty input")
    total = BleuStats()
    for c, r in zip(candidates, references):
        total = total + bleu_stats(c, r)
    return bleu_score_from_stats(total)


def doc_bleu(candidate_docs: Sequence[Sequence[str]],
             reference_docs: Sequence[Sequence[str]]) -> float:
    """Document BLEU: each document is concatenated into one segment first,
    so n-grams may cross sentence boundaries."""
    if len(candidate_docs) != len(reference_docs):
        raise ValueError(
            f"doc_bleu: {len(candidate_docs)} candidate docs vs "
            f"{len(reference_docs)} reference docs"
        )
    for i, (c, r) in enumerate(zip(candidate_docs, reference_docs)):
        if len(c) != len(r):
            raise ValueError(f"doc_bleu: document {i} has {len(c)} vs {len(r)} sentences")
    cands = [" ".join(d) for d in candidate_docs]
    refs = [" ".join(d) for d in reference_docs]
    return bleu(cands, refs)


# --- contrastive pronoun evaluation ------------------------------------------

DISTANCE_BUCKETS = ("0", "1", "2", "3", ">3")


def distance_bucket(d: int) -> str:
    return str(d) if d <= 3 else ">3"


@dataclass(frozen=True)
class InstanceResult:
    correct: bool
    chosen: int | None
    scores: tuple[float, ...]
    gold_pronoun: str
    location: str
    distance: int


def _candidate_scores(model: Model, ctx_ids: list[int], src_ids: list[int],
                      targets: Sequence[Sequence[int]]) -> list[float]:
    """Teacher-forced log-probability sums, one forward for all candidates."""
    max_len = model.config.max_len
    with ad.no_grad():
        ctx = np.asarray([ctx_ids], dtype=np.int64)
        src = np.asarray([src_ids], dtype=np.int64)
        fused, src_pad = model.forward_fused(ctx, src)

        width = max(len(t) for t in targets) + 1
        n = len(targets)
        tgt_in = np.full((n, width), PAD, dtype=np.int64)
        tgt_out = np.full((n, width), PAD, dtype=np.int64)
        for i, t in enumerate(targets):
            tgt_in[i, 0] = BOS
            tgt_in[i, 1:len(t) + 1] = t
            tgt_out[i, :len(t)] = t
            tgt_out[i, len(t)] = EOS

        fused_rep = ad.Tensor(np.repeat(fused.data, n, axis=0))
        states = model.decoder_states(fused_rep, np.repeat(src_pad, n, axis=0), tgt_in)
        logits = model.project(states).data.astype(np.float64)

    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    rows = np.arange(width)
    out = []
    for i in range(n):
        picked = logp[i, rows, tgt_out[i]]
        mask = tgt_out[i] != PAD
        out.append(float(picked[mask].sum()))
    return out


def score_contrastive_instance(model: Model, bpe: BpeModel,
                               instance: ContrastiveInstance, k: int,
                               context_mode: str = "prev") -> InstanceResult:
    if context_mode == "prev":
        parts = list(instance.context)[-k:]
    elif context_mode == "self":
        parts = [instance.source]
    else:
        raise ValueError(f"score_contrastive_instance: unsupported context mode {context_mode!r}")
    max_len = model.config.max_len
    ctx_ids = bpe.encode(" ".join(parts))[-max_len:]
    src_ids = bpe.encode(instance.source)[:max_len]
    if not src_ids:
        raise ValueError("score_contrastive_instance: source tokenizes to nothing")
    if not ctx_ids:
        ctx_ids = list(src_ids)
    targets = [bpe.encode(c.target)[:max_len - 1] for c in instance.candidates]
    if any(not t for t in targets):
        raise ValueError("score_contrastive_instance: a candidate tokenizes to nothing")

    scores = _candidate_scores(model, ctx_ids, src_ids, targets)
    top = max(scores)
    winners = [i for i, s in enumerate(scores) if s == top]
    gold = next(i for i, c in enumerate(instance.candidates) if c.correct)
    if len(winners) == 1:
        chosen = winners[0]
        correct = chosen == gold
    else:
        chosen = None
        correct = False
    return InstanceResult(
        correct=correct,
        chosen=chosen,
        scores=tuple(scores),
        gold_pronoun=instance.candidates[gold].pronoun,
        location=instance.antecedent_location,
        distance=instance.antecedent_distance,
    )


def evaluate_contrastive(model: Model, bpe: BpeModel,
                         instances: Sequence[ContrastiveInstance], k: int,
                         context_mode: str = "prev",
                         progress: Callable[[str], None] | None = None,
                         ) -> list[InstanceResult]:
    if not instances:
        raise ValueError("evaluate_contrastive: no instances")
    results = []
    for i, inst in enumerate(instances):
        results.append(score_contrastive_instance(model, bpe, inst, k, context_mode))
        if progress and (i + 1) % 200 == 0:
            progress(f"scored {i + 1}/{len(instances)} instances")
    return results


@dataclass
class Cell:
    count: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.count if self.count else 0.0

    def to_dict(self) -> dict:
        return {"count": self.count, "correct": self.correct, "accuracy": self.accuracy}


@dataclass
class ContrastiveReport:
    total: Cell
    by_pronoun: dict[str, Cell]
    by_location: dict[str, Cell]
    by_distance: dict[str, Cell]

    def to_dict(self, meta: Mapping | None = None) -> dict:
        out = {
            "total": self.total.to_dict(),
            "by_pronoun": {k: v.to_dict() for k, v in sorted(self.by_pronoun.items())},
            "by_location": {k: v.to_dict() for k, v in sorted(self.by_location.items())},
            "by_distance": {k: self.by_distance[k].to_dict()
                            for k in DISTANCE_BUCKETS if k in self.by_distance},
        }
        if meta:
            out["meta"] = dict(meta)
        return out


def aggregate_contrastive(results: Sequence[InstanceResult]) -> ContrastiveReport:
    if not results:
        raise ValueError("aggregate_contrastive: no results")
    total = Cell()
    by_pronoun: dict[str, Cell] = {}
    by_location: dict[str, Cell] = {}
    by_distance: dict[str, Cell] = {}
    for r in results:
        for cell in (total,
                     by_pronoun.setdefault(r.gold_pronoun, Cell()),
                     by_location.setdefault(r.location, Cell()),
                     by_distance.setdefault(distance_bucket(r.distance), Cell())):
            cell.count += 1
            cell.correct += int(r.correct)
    return ContrastiveReport(total, by_pronoun, by_location, by_distance)


def majority_class_rate(results: Sequence[InstanceResult]) -> float:
    """Frequency of the most common gold pronoun; the floor a blind
    majority guesser would score."""
    if not results:
        raise ValueError("majority_class_rate: no results")
    counts = Counter(r.gold_pronoun for r in results)
    return max(counts.values()) / len(results)


def format_report_table(report: ContrastiveReport) -> str:
    rows = [("category", "bucket", "count", "accuracy")]
    rows.append(("total", "-", str(report.total.count), f"{report.total.accuracy:.4f}"))
    for label, cells in (("pronoun", report.by_pronoun),
                         ("location", report.by_location)):
        for key in sorted(cells):
            rows.append((label, key, str(cells[key].count), f"{cells[key].accuracy:.4f}"))
    for key in DISTANCE_BUCKETS:
        if key in report.by_distance:
            c = report.by_distance[key]
            rows.append(("distance", key, str(c.count), f"{c.accuracy:.4f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return "\n".join(
        "  ".join(col.ljust(w) for col, w in zip(r, widths)).rstrip() for r in rows
    )
