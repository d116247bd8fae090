"""Shared fixtures for the expensive end-of-pipeline tests.

The session-scoped fixtures build one synthetic discourse corpus and train
the four context-regime models the acceptance suite probes. Training takes
a couple of minutes per model; set DOCNMT_TEST_CACHE to a directory to
reuse checkpoints across runs while iterating (the cache key includes a
digest of the package sources, so stale models are never picked up).
"""

import hashlib
import os
import sys
from pathlib import Path

import pytest

from docnmt.bpe import train_bpe
from docnmt.checkpoint import load_checkpoint, save_checkpoint
from docnmt.config import profile_config
from docnmt.corpus import (build_context, make_contrastive_set,
                           make_synthetic_corpus)
from docnmt.model import Model
from docnmt.seeding import derive_seed
from docnmt.training import TrainConfig, encode_examples, train_loop

ACCEPT_SEED = 7
N_TRAIN_DOCS = 2000
N_TEST_DOCS = 120
DOC_LEN = 12
K = 2
VOCAB_BUDGET = 1000
MAX_EPOCHS = 4

REGIMES = ("prev", "random", "mix", "mix-adapt")
_REGIME_MODES = {"prev": ("prev", False), "random": ("random", False),
                 "mix": ("mix", False), "mix-adapt": ("mix", True)}


def _say(msg: str) -> None:
    print(msg, file=sys.__stderr__, flush=True)


@pytest.fixture(scope="session")
def discourse_corpus():
    train, val = make_synthetic_corpus(N_TRAIN_DOCS, DOC_LEN, ACCEPT_SEED)
    test, _ = make_synthetic_corpus(N_TEST_DOCS, DOC_LEN,
                                    derive_seed(ACCEPT_SEED, "test"))
    return {"train": train, "val": val, "test": test,
            "instances": make_contrastive_set(test, K)}


@pytest.fixture(scope="session")
def discourse_bpe(discourse_corpus):
    lines = [s for doc in discourse_corpus["train"]
             for pair in doc.sentences for s in pair]
    return train_bpe(lines, VOCAB_BUDGET)


def train_regime(name: str, corpus: dict, bpe, max_epochs: int = MAX_EPOCHS,
                 progress=None) -> Model:
    """Train one context-regime model on the shared synthetic corpus."""
    mode, adapt = _REGIME_MODES[name]
    desk = profile_config("desk")
    train_ex = encode_examples(
        bpe,
        build_context(corpus["train"], mode, K,
                      derive_seed(ACCEPT_SEED, f"context:{name}")),
        desk.max_len)
    val_ex = encode_examples(
        bpe,
        build_context(corpus["val"], "prev", K,
                      derive_seed(ACCEPT_SEED, f"val-context:{name}")),
        desk.max_len)
    model = Model.init(desk.model_config(bpe.size),
                       derive_seed(ACCEPT_SEED, f"init:{name}"))
    cfg = TrainConfig(base_lr=desk.base_lr, warmup_steps=desk.warmup_steps,
                      batch_size=desk.batch_size, patience=desk.patience,
                      adapt_loss=adapt,
                      seed=derive_seed(ACCEPT_SEED, f"train:{name}"),
                      max_epochs=max_epochs)
    train_loop(model, train_ex, val_ex, cfg, progress=progress)
    return model


def _source_fingerprint() -> str:
    src = Path(__file__).resolve().parent.parent / "src" / "docnmt"
    h = hashlib.sha256()
    for f in sorted(src.glob("*.py")):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    h.update(f"{ACCEPT_SEED}:{N_TRAIN_DOCS}:{DOC_LEN}:{K}:"
             f"{VOCAB_BUDGET}:{MAX_EPOCHS}".encode())
    return h.hexdigest()[:16]


@pytest.fixture(scope="session")
def regime_models(discourse_corpus, discourse_bpe):
    cache_dir = os.environ.get("DOCNMT_TEST_CACHE")
    tag = _source_fingerprint()
    models = {}
    for name in REGIMES:
        cached = Path(cache_dir) / f"{name}-{tag}.dctx" if cache_dir else None
        if cached is not None and cached.exists():
            _say(f"[fixture] {name}: cached model {cached.name}")
            models[name] = load_checkpoint(cached).to_model()
            continue
        _say(f"[fixture] training {name} regime "
             f"({N_TRAIN_DOCS} docs, {MAX_EPOCHS} epochs)")
        models[name] = train_regime(
            name, discourse_corpus, discourse_bpe,
            progress=lambda m, n=name: _say(f"[fixture] {n}: {m}"))
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(cached, models[name])
    return models
