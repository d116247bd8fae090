"""Documents, context assembly, and the synthetic discourse corpus.

A document is an ordered list of aligned sentence pairs. Context for a
sentence is built from the same document (previous-k mode), from anywhere
in the corpus (random mode), or as a per-example coin flip between the two
(mix mode). The synthetic generator produces toy English-German documents
whose pronoun translations are only resolvable from earlier sentences,
with the antecedent distance recorded for evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Document", "PronounRef", "ContextExample", "Candidate", "ContrastiveInstance",
    "Grammar", "DEFAULT_GRAMMAR", "CorpusError",
    "load_documents", "save_documents", "bpe_training_lines",
    "build_context", "CONTEXT_MODES",
    "make_synthetic_corpus", "make_contrastive_set",
    "write_contrastive", "load_contrastive",
    "INTRASEGMENTAL", "EXTERNAL",
]

CONTEXT_MODES = ("prev", "random", "mix", "self")
INTRASEGMENTAL = "intrasegmental"
EXTERNAL = "external"


class CorpusError(ValueError):
    """Malformed corpus file or unusable corpus arguments."""


@dataclass(frozen=True)
class PronounRef:
    """A pronoun occurrence whose translation depends on an antecedent."""
    sentence_index: int
    gender: str
    distance: int
    target_token_index: int


@dataclass
class Document:
    doc_id: str
    sentences: list[tuple[str, str]]
    pronouns: list[PronounRef] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class ContextExample:
    context: str
    source: str
    target: str
    label: int


@dataclass(frozen=True)
class Candidate:
    target: str
    correct: bool
    pronoun: str


@dataclass(frozen=True)
class ContrastiveInstance:
    context: tuple[str, ...]
    source: str
    candidates: tuple[Candidate, ...]
    antecedent_location: str
    antecedent_distance: int


def load_documents(path: str | Path) -> list[Document]:
    """Parse a parallel document file: TAB-separated pairs, blank line between docs."""
    path = Path(path)
    docs: list[Document] = []
    current: list[tuple[str, str]] = []

    def close() -> None:
        if current:
            docs.append(Document(doc_id=f"{path.stem}-{len(docs):04d}", sentences=list(current)))
            current.clear()

    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            close()
            continue
        if "\t" not in line:
            raise CorpusError(f"{path}: line {n}: expected TAB between source and target")
        src, _, tgt = line.partition("\t")
        current.append((src, tgt))
    close()
    if not docs:
        raise CorpusError(f"{path}: no documents found")
    return docs


def save_documents(docs: Sequence[Document], path: str | Path) -> None:
    blocks = ["\n".join(f"{s}\t{t}" for s, t in d.sentences) for d in docs]
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def bpe_training_lines(paths: Iterable[str | Path]) -> list[str]:
    """Collect tokenizer training text: both sides of parallel files, all lines of plain ones."""
    lines: list[str] = []
    for p in paths:
        for line in Path(p).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            if "\t" in line:
                src, _, tgt = line.partition("\t")
                lines.append(src)
                lines.append(tgt)
            else:
                lines.append(line)
    return lines


def _prev_context(doc: Document, i: int, k: int) -> list[str]:
    cur = doc.sentences[i][0]
    return [doc.sentences[j][0] if j >= 0 else cur for j in range(i - k, i)]


def build_context(docs: Sequence[Document], mode: str, k: int, seed: int = 0) -> list[ContextExample]:
    """Assemble one ContextExample per sentence, in corpus order.

    Previous-k slots before the document start are filled with the current
    sentence itself. Random contexts are drawn once, here, so a training
    run sees a fixed assignment; the label marks whether the context really
    belongs to the sentence.
    """
    if mode not in CONTEXT_MODES:
        raise CorpusError(f"build_context: unknown mode {mode!r}, expected one of {CONTEXT_MODES}")
    if k < 1:
        raise CorpusError(f"build_context: k must be >= 1, got {k}")
    if not docs:
        raise CorpusError("build_context: empty document list")
    pool = [src for d in docs for src, _ in d.sentences]
    rng = np.random.default_rng(seed)
    examples: list[ContextExample] = []
    for doc in docs:
        for i, (src, tgt) in enumerate(doc.sentences):
            if mode == "prev":
                parts, label = _prev_context(doc, i, k), 1
            elif mode == "self":
                parts, label = [src], 1
            elif mode == "random":
                parts = [pool[r] for r in rng.integers(0, len(pool), size=k)]
                label = 0
            else:  # mix
                if rng.random() < 0.5:
                    parts, label = _prev_context(doc, i, k), 1
                else:
                    parts = [pool[r] for r in rng.integers(0, len(pool), size=k)]
                    label = 0
            examples.append(ContextExample(" ".join(parts), src, tgt, label))
    return examples


# --- synthetic discourse corpus ---------------------------------------------


@dataclass(frozen=True)
class Grammar:
    """Toy bilingual grammar with grammatical gender on the target side."""
    nouns: tuple[tuple[str, str, str], ...]   # (english, german, gender)
    verbs: tuple[tuple[str, str], ...]        # (english, german)
    articles: Mapping[str, str]
    pronouns: Mapping[str, str]
    p_compound_opening: float = 0.3
    p_noun: float = 0.30
    p_compound: float = 0.20
    # remaining mass goes to pronoun sentences

    def __post_init__(self):
        if not self.nouns:
            raise CorpusError("grammar: needs at least one noun")
        if not self.verbs:
            raise CorpusError("grammar: needs at least one verb")
        for _, _, g in self.nouns:
            if g not in self.articles or g not in self.pronouns:
                raise CorpusError(f"grammar: no article/pronoun for gender {g!r}")
        if self.p_noun + self.p_compound >= 1.0:
            raise CorpusError("grammar: sentence type weights leave no room for pronouns")


DEFAULT_GRAMMAR = Grammar(
    nouns=(
        ("house", "haus", "es"), ("car", "auto", "es"),
        ("book", "buch", "es"), ("horse", "pferd", "es"),
        ("dog", "hund", "er"), ("table", "tisch", "er"),
        ("tree", "baum", "er"), ("bird", "vogel", "er"),
        ("cat", "katze", "sie"), ("lamp", "lampe", "sie"),
        ("flower", "blume", "sie"), ("door", "tuer", "sie"),
    ),
    verbs=(
        ("sleeps", "schlaeft"), ("falls", "faellt"), ("waits", "wartet"),
        ("works", "arbeitet"), ("shines", "leuchtet"), ("stands", "steht"),
        ("moves", "bewegt"), ("stops", "stoppt"), ("turns", "dreht"),
        ("stays", "bleibt"),
    ),
    articles={"es": "das", "er": "der", "sie": "die"},
    pronouns={"es": "es", "er": "er", "sie": "sie"},
)


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(0, len(seq)))]


def _generate_document(rng: np.random.Generator, doc_len: int, grammar: Grammar,
                       doc_id: str) -> Document:
    sentences: list[tuple[str, str]] = []
    refs: list[PronounRef] = []
    last: tuple[str, int] | None = None  # (gender, sentence index)

    for i in range(doc_len):
        if last is None:
            kind = "compound" if rng.random() < grammar.p_compound_opening else "noun"
        else:
            u = rng.random()
            if u < grammar.p_noun:
                kind = "noun"
            elif u < grammar.p_noun + grammar.p_compound:
                kind = "compound"
            else:
                kind = "pronoun"

        if kind == "noun":
            en, de, g = _pick(rng, grammar.nouns)
            ev, dv = _pick(rng, grammar.verbs)
            sentences.append((f"the {en} {ev} .", f"{grammar.articles[g]} {de} {dv} ."))
            last = (g, i)
        elif kind == "compound":
            en, de, g = _pick(rng, grammar.nouns)
            ev1, dv1 = _pick(rng, grammar.verbs)
            ev2, dv2 = _pick(rng, grammar.verbs)
            tgt_words = [grammar.articles[g], de, dv1, "und", grammar.pronouns[g], dv2, "."]
            sentences.append((
                f"the {en} {ev1} and it {ev2} .",
                " ".join(tgt_words),
            ))
            refs.append(PronounRef(i, g, 0, tgt_words.index(grammar.pronouns[g])))
            last = (g, i)
        else:
            ev, dv = _pick(rng, grammar.verbs)
            g, j = last
            sentences.append((f"it {ev} .", f"{grammar.pronouns[g]} {dv} ."))
            refs.append(PronounRef(i, g, i - j, 0))

    return Document(doc_id=doc_id, sentences=sentences, pronouns=refs)


def make_synthetic_corpus(n_docs: int, doc_len: int, seed: int,
                          n_val_docs: int | None = None,
                          grammar: Grammar = DEFAULT_GRAMMAR,
                          ) -> tuple[list[Document], list[Document]]:
    """Generate (train, validation) document lists, deterministically per seed."""
    if n_docs < 1 or doc_len < 1:
        raise CorpusError(f"make_synthetic_corpus: need n_docs >= 1 and doc_len >= 1, "
                          f"got {n_docs} and {doc_len}")
    if n_val_docs is None:
        n_val_docs = max(2, n_docs // 20)
    rng = np.random.default_rng(seed)
    train = [_generate_document(rng, doc_len, grammar, f"synth-{i:05d}")
             for i in range(n_docs)]
    val = [_generate_document(rng, doc_len, grammar, f"synth-val-{i:05d}")
           for i in range(n_val_docs)]
    return train, val


def make_contrastive_set(docs: Sequence[Document], k: int,
                         grammar: Grammar = DEFAULT_GRAMMAR) -> list[ContrastiveInstance]:
    """One instance per recorded pronoun: the true target plus one variant
    per competing pronoun, everything else kept identical."""
    if k < 1:
        raise CorpusError(f"make_contrastive_set: k must be >= 1, got {k}")
    genders = sorted(grammar.pronouns)
    instances: list[ContrastiveInstance] = []
    for doc in docs:
        for ref in doc.pronouns:
            src, tgt = doc.sentences[ref.sentence_index]
            words = tgt.split()
            cands = []
            for g in genders:
                swapped = list(words)
                swapped[ref.target_token_index] = grammar.pronouns[g]
                cands.append(Candidate(
                    target=" ".join(swapped),
                    correct=(g == ref.gender),
                    pronoun=grammar.pronouns[g],
                ))
            instances.append(ContrastiveInstance(
                context=tuple(_prev_context(doc, ref.sentence_index, k)),
                source=src,
                candidates=tuple(cands),
                antecedent_location=INTRASEGMENTAL if ref.distance == 0 else EXTERNAL,
                antecedent_distance=ref.distance,
            ))
    return instances


def write_contrastive(instances: Sequence[ContrastiveInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps({
                "context": list(inst.context),
                "source": inst.source,
                "candidates": [asdict(c) for c in inst.candidates],
                "antecedent_location": inst.antecedent_location,
                "antecedent_distance": inst.antecedent_distance,
            }, ensure_ascii=False) + "\n")


def load_contrastive(path: str | Path) -> list[ContrastiveInstance]:
    path = Path(path)
    instances: list[ContrastiveInstance] = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}: line {n}: invalid JSON ({e.msg})") from None
        try:
            instances.append(ContrastiveInstance(
                context=tuple(obj["context"]),
                source=obj["source"],
                candidates=tuple(
                    Candidate(c["target"], bool(c["correct"]), c["pronoun"])
                    for c in obj["candidates"]
                ),
                antecedent_location=obj["antecedent_location"],
                antecedent_distance=int(obj["antecedent_distance"]),
            ))
        except (KeyError, TypeError) as e:
            raise CorpusError(f"{path}: line {n}: missing or malformed field ({e})") from None
    if not instances:
        raise CorpusError(f"{path}: no instances found")
    return instances
