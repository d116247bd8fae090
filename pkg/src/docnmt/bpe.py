"""Byte-pair tokenizer trained jointly over source and target text.

Words are split on whitespace; the last character of each word carries an
end-of-word marker so merges never cross word boundaries and decoding can
put the spaces back. Four special ids sit at the bottom of every vocab.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "PAD", "BOS", "EOS", "UNK", "SPECIALS", "END_MARK",
    "BpeModel", "BpeError", "train_bpe", "load_bpe", "save_bpe",
]

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")
END_MARK = "</w>"


class BpeError(ValueError):
    """Bad corpus, bad budget, or a malformed model file."""


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + END_MARK,)


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    vocab: dict[str, int]
    _inverse: dict[int, str] = field(default_factory=dict, repr=False)
    _word_cache: dict[str, list[int]] = field(default_factory=dict, repr=False)
    _ranks: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._inverse = {i: tok for tok, i in self.vocab.items()}
        self._ranks = {pair: r for r, pair in enumerate(self.merges)}

    @property
    def size(self) -> int:
        return len(self.vocab)

    def encode_word(self, word: str) -> list[int]:
        cached = self._word_cache.get(word)
        if cached is not None:
            return cached
        symbols = list(_word_symbols(word))
        while len(symbols) > 1:
            best_rank = None
            best_at = -1
            for i in range(len(symbols) - 1):
                r = self._ranks.get((symbols[i], symbols[i + 1]))
                if r is not None and (best_rank is None or r < best_rank):
                    best_rank = r
                    best_at = i
            if best_rank is None:
                break
            symbols[best_at:best_at + 2] = [symbols[best_at] + symbols[best_at + 1]]
        ids = [self.vocab.get(s, UNK) for s in symbols]
        self._word_cache[word] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for word in text.split():
            ids.extend(self.encode_word(word))
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        pieces: list[str] = []
        for i in ids:
            i = int(i)
            if i < 0 or i >= len(self._inverse):
                raise BpeError(f"decode: id {i} outside vocab of {len(self._inverse)}")
            if i in (PAD, BOS, EOS, UNK):
                continue
            pieces.append(self._inverse[i])
        text = "".join(pieces).replace(END_MARK, " ")
        return " ".join(text.split())


def train_bpe(lines: Iterable[str], vocab_size: int) -> BpeModel:
    """Learn merges greedily by pair frequency until the budget is full.

    Ties between equally frequent pairs break lexicographically, and the
    loop also stops early once no adjacent pair occurs at least twice.
    """
    word_freq: Counter[str] = Counter()
    for line in lines:
        word_freq.update(line.split())
    if not word_freq:
        raise BpeError("train_bpe: corpus has no words")

    words: dict[str, list[str]] = {w: list(_word_symbols(w)) for w in word_freq}
    alphabet = sorted({s for syms in words.values() for s in syms})
    floor = len(alphabet) + len(SPECIALS)
    if vocab_size < floor:
        raise BpeError(
            f"train_bpe: vocab budget {vocab_size} below {floor} "
            f"({len(alphabet)} base symbols plus {len(SPECIALS)} specials)"
        )

    vocab: dict[str, int] = {tok: i for i, tok in enumerate(SPECIALS)}
    for sym in alphabet:
        vocab[sym] = len(vocab)

    merges: list[tuple[str, str]] = []
    while len(vocab) < vocab_size:
        pair_freq: Counter[tuple[str, str]] = Counter()
        for w, syms in words.items():
            f = word_freq[w]
            for i in range(len(syms) - 1):
                pair_freq[(syms[i], syms[i + 1])] += f
        if not pair_freq:
            break
        top = max(pair_freq.values())
        if top < 2:
            break
        pair = min(p for p, c in pair_freq.items() if c == top)
        a, b = pair
        joined = a + b
        merges.append(pair)
        vocab[joined] = len(vocab)
        for w, syms in words.items():
            i = 0
            while i < len(syms) - 1:
                if syms[i] == a and syms[i + 1] == b:
                    syms[i:i + 2] = [joined]
                else:
                    i += 1
    return BpeModel(merges=merges, vocab=vocab)


def save_bpe(model: BpeModel, path: str | Path) -> None:
    lines = ["BPE v1", str(model.size)]
    lines.extend(f"{a} {b}" for a, b in model.merges)
    lines.extend(f"{tok}\t{i}" for tok, i in model.vocab.items())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_bpe(path: str | Path) -> BpeModel:
    raw = Path(path).read_text(encoding="utf-8").splitlines()
    if not raw or raw[0].strip() != "BPE v1":
        raise BpeError(f"{path}: not a BPE model file (missing 'BPE v1' header)")
    if len(raw) < 2:
        raise BpeError(f"{path}: truncated model file")
    try:
        declared = int(raw[1])
    except ValueError:
        raise BpeError(f"{path}: line 2 must be the vocab size") from None
    merges: list[tuple[str, str]] = []
    vocab: dict[str, int] = {}
    for n, line in enumerate(raw[2:], start=3):
        if not line:
            continue
        if "\t" in line:
            tok, _, num = line.partition("\t")
            try:
                vocab[tok] = int(num)
            except ValueError:
                raise BpeError(f"{path}: line {n}: bad vocab id {num!r}") from None
        else:
            parts = line.split(" ")
            if len(parts) != 2:
                raise BpeError(f"{path}: line {n}: bad merge entry {line!r}")
            merges.append((parts[0], parts[1]))
    if len(vocab) != declared:
        raise BpeError(
            f"{path}: declared vocab size {declared} but found {len(vocab)} entries"
        )
    for i, tok in enumerate(SPECIALS):
        if vocab.get(tok) != i:
            raise BpeError(f"{path}: special {tok!r} must have id {i}")
    return BpeModel(merges=merges, vocab=vocab)
