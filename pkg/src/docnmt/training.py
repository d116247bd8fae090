"""Batch loss, learning-rate schedule, and the training loop.

The loss is token-mean cross-entropy over non-PAD target positions. With
adaptive scaling on, the batch loss is multiplied by the fraction of
examples whose context actually belongs to their sentence, so a batch of
pure mismatched context contributes nothing, gradients included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, backward
from .bpe import BOS, EOS, PAD, BpeModel
from .corpus import ContextExample
from .model import Model
from .optim import AdamState, adam_step, zero_gradients
from .seeding import derive_seed

__all__ = [
    "TrainConfig", "EncodedExample", "TrainResult",
    "encode_examples", "compute_batch_loss", "batch_alpha",
    "lr_at", "validate_perplexity", "train_loop", "write_training_log",
]


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 0.2
    warmup_steps: int = 400
    batch_size: int = 32
    patience: int = 7
    adapt_loss: bool = False
    seed: int = 0
    max_epochs: int = 40

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        for name in ("warmup_steps", "batch_size", "patience", "max_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class EncodedExample:
    ctx: tuple[int, ...]
    src: tuple[int, ...]
    tgt: tuple[int, ...]
    label: int


@dataclass
class TrainResult:
    best_params: dict[str, np.ndarray]
    best_ppl: float
    best_epoch: int
    steps: int
    events: list[tuple] = field(default_factory=list)
    aborted: bool = False


def encode_examples(bpe: BpeModel, examples: Sequence[ContextExample],
                    max_len: int) -> list[EncodedExample]:
    """Tokenize and truncate: context keeps its last tokens (the nearest
    ones), source and target keep their first tokens."""
    out: list[EncodedExample] = []
    for i, ex in enumerate(examples):
        ctx = bpe.encode(ex.context)[-max_len:]
        src = bpe.encode(ex.source)[:max_len]
        tgt = bpe.encode(ex.target)[:max_len - 1]
        if not src:
            raise ValueError(f"example {i}: source tokenizes to nothing")
        if not tgt:
            raise ValueError(f"example {i}: target tokenizes to nothing")
        if not ctx:
            ctx = list(src)[-max_len:]
        out.append(EncodedExample(tuple(ctx), tuple(src), tuple(tgt), ex.label))
    return out


def _pad_to_array(seqs: Sequence[Sequence[int]]) -> np.ndarray:
    width = max(len(s) for s in seqs)
    arr = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        arr[i, :len(s)] = s
    return arr


def batch_alpha(batch: Sequence[EncodedExample]) -> float:
    return sum(ex.label for ex in batch) / len(batch)


def compute_batch_loss(model: Model, batch: Sequence[EncodedExample],
                       adapt_loss: bool, train: bool = False, rng=None) -> Tensor:
    if not batch:
        raise ValueError("compute_batch_loss: empty batch")
    ctx = _pad_to_array([ex.ctx for ex in batch])
    src = _pad_to_array([ex.src for ex in batch])
    tgt_in = _pad_to_array([(BOS,) + ex.tgt for ex in batch])
    tgt_out = _pad_to_array([ex.tgt + (EOS,) for ex in batch])

    mask = tgt_out != PAD
    n_tokens = int(mask.sum())
    if n_tokens == 0:
        raise ValueError("compute_batch_loss: batch has no non-PAD target tokens")

    fused, src_pad = model.forward_fused(ctx, src, train, rng)
    states = model.decoder_states(fused, src_pad, tgt_in, train, rng)
    logits = model.project(states)

    b, lt, v = logits.shape
    flat = ad.reshape(logits, (b * lt, v))
    ce = ad.cross_entropy(flat, tgt_out.reshape(-1))
    masked = ad.mul(ce, Tensor(mask.reshape(-1).astype(ce.dtype)))
    loss = ad.scale(ad.mean(masked), ce.size / n_tokens)
    if adapt_loss:
        loss = ad.scale(loss, batch_alpha(batch))
    return loss


def lr_at(step: int, d_model: int, warmup_steps: int, base_lr: float) -> float:
    """Inverse-sqrt schedule with linear warmup, scaled by d_model**-0.5."""
    if step < 1:
        raise ValueError(f"lr_at: step must be >= 1, got {step}")
    if warmup_steps < 1:
        raise ValueError(f"lr_at: warmup_steps must be >= 1, got {warmup_steps}")
    if d_model < 1 or base_lr <= 0:
        raise ValueError(f"lr_at: bad d_model {d_model} or base_lr {base_lr}")
    return base_lr * d_model ** -0.5 * min(step ** -0.5, step * warmup_steps ** -1.5)


def validate_perplexity(model: Model, examples: Sequence[EncodedExample],
                        batch_size: int = 64) -> float:
    """exp of token-mean cross-entropy over the whole set, teacher-forced."""
    if not examples:
        raise ValueError("validate_perplexity: empty example list")
    total_ce = 0.0
    total_tokens = 0
    with ad.no_grad():
        for at in range(0, len(examples), batch_size):
            chunk = examples[at:at + batch_size]
            ctx = _pad_to_array([ex.ctx for ex in chunk])
            src = _pad_to_array([ex.src for ex in chunk])
            tgt_in = _pad_to_array([(BOS,) + ex.tgt for ex in chunk])
            tgt_out = _pad_to_array([ex.tgt + (EOS,) for ex in chunk])
            mask = (tgt_out != PAD).reshape(-1)

            fused, src_pad = model.forward_fused(ctx, src)
            states = model.decoder_states(fused, src_pad, tgt_in)
            logits = model.project(states)
            b, lt, v = logits.shape
            ce = ad.cross_entropy(ad.reshape(logits, (b * lt, v)), tgt_out.reshape(-1))
            total_ce += float((ce.data * mask).sum())
            total_tokens += int(mask.sum())
    return float(np.exp(total_ce / total_tokens))


def _snapshot(model: Model) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in model.params.items()}


def _restore(model: Model, snap: dict[str, np.ndarray]) -> None:
    for k, p in model.params.items():
        p.data = snap[k].copy()


def train_loop(model: Model, train_examples: Sequence[EncodedExample],
               val_examples: Sequence[EncodedExample], config: TrainConfig,
               progress: Callable[[str], None] | None = None) -> TrainResult:
    """Adam + warmup schedule, validation each epoch, patience-based stop.

    Returns (and leaves the model holding) the parameters of the epoch with
    the best validation perplexity. A non-finite training loss aborts the
    run and falls back to the last good snapshot.
    """
    if not train_examples:
        raise ValueError("train_loop: no training examples")
    if not val_examples:
        raise ValueError("train_loop: no validation examples")

    shuffle_rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))
    dropout_rng = np.random.default_rng(derive_seed(config.seed, "dropout"))
    adam = AdamState.for_params(model.params)
    d_model = model.config.d_model

    fallback = _snapshot(model)
    best: dict[str, np.ndarray] | None = None
    best_ppl = float("inf")
    best_epoch = 0
    bad_epochs = 0
    step = 0
    events: list[tuple] = []

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_examples))
        for at in range(0, len(order), config.batch_size):
            batch = [train_examples[i] for i in order[at:at + config.batch_size]]
            step += 1
            lr = lr_at(step, d_model, config.warmup_steps, config.base_lr)
            zero_gradients(model.params)
            loss = compute_batch_loss(model, batch, config.adapt_loss,
                                      train=True, rng=dropout_rng)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                _restore(model, best if best is not None else fallback)
                if progress:
                    progress(f"abort: non-finite loss at step {step}")
                return TrainResult(best if best is not None else fallback,
                                   best_ppl, best_epoch, step, events, aborted=True)
            backward(loss)
            adam_step(model.params, adam, lr)
            events.append(("step", step, lr, loss_val, batch_alpha(batch)))

        ppl = validate_perplexity(model, val_examples)
        events.append(("epoch", epoch, ppl))
        if progress:
            progress(f"epoch {epoch}: val perplexity {ppl:.4f}")
        if ppl < best_ppl:
            best = _snapshot(model)
            best_ppl = ppl
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    assert best is not None
    _restore(model, best)
    return TrainResult(best, best_ppl, best_epoch, step, events)


def write_training_log(events: Sequence[tuple], path: str | Path) -> None:
    lines = ["step\tlr\tloss\talpha"]
    for ev in events:
        if ev[0] == "step":
            _, step, lr, loss, alpha = ev
            lines.append(f"{step}\t{lr!r}\t{loss!r}\t{alpha!r}")
        else:
            _, epoch, ppl = ev
            lines.append(f"epoch\t{epoch}\tval_perplexity\t{ppl!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
