"""Two-encoder translation model with attention fusion.

The source sentence and its context go through separate encoder stacks
that share nothing. A single multi-head attention block then queries the
context encoding from the source encoding, and its output is added onto
the source encoding element-wise. The decoder is a standard causal
transformer over that fused representation.

All blocks are pre-norm; attention projections carry no bias so that a
zeroed fusion value projection leaves the source encoding exactly intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bpe import BOS, PAD

__all__ = ["ModelConfig", "Model", "init_parameters"]

NEG_INF = -1e9


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_len: int = 64
    dropout: float = 0.1

    def __post_init__(self):
        if self.vocab_size < 5:
            raise ValueError(f"vocab_size must cover the specials plus content, got {self.vocab_size}")
        for name in ("n_layers", "n_heads", "d_model", "d_ff", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def init_parameters(config: ModelConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Glorot-uniform matrices, zero vectors, all strictly inside (-1, 1)."""
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}

    def mat(name: str, fan_in: int, fan_out: int) -> None:
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        data = rng.uniform(-lim, lim, size=(fan_in, fan_out)).astype(dtype)
        params[name] = Tensor(data, requires_grad=True, name=name)

    def table(name: str, rows: int, d: int) -> None:
        lim = 1.0 / math.sqrt(d)
        data = rng.uniform(-lim, lim, size=(rows, d)).astype(dtype)
        params[name] = Tensor(data, requires_grad=True, name=name)

    def vec(name: str, n: int) -> None:
        params[name] = Tensor(np.zeros(n, dtype=dtype), requires_grad=True, name=name)

    def norm(name: str) -> None:
        vec(f"{name}.g", config.d_model)
        vec(f"{name}.b", config.d_model)

    def attention(name: str) -> None:
        for w in ("wq", "wk", "wv", "wo"):
            mat(f"{name}.{w}", config.d_model, config.d_model)

    def ffn(name: str) -> None:
        mat(f"{name}.w1", config.d_model, config.d_ff)
        vec(f"{name}.b1", config.d_ff)
        mat(f"{name}.w2", config.d_ff, config.d_model)
        vec(f"{name}.b2", config.d_model)

    for enc in ("src", "ctx"):
        table(f"{enc}.tok_emb", config.vocab_size, config.d_model)
        table(f"{enc}.pos_emb", config.max_len, config.d_model)
        for i in range(config.n_layers):
            norm(f"{enc}.l{i}.ln1")
            attention(f"{enc}.l{i}.attn")
            norm(f"{enc}.l{i}.ln2")
            ffn(f"{enc}.l{i}.ffn")
        norm(f"{enc}.ln_out")

    attention("fuse.attn")

    table("dec.tok_emb", config.vocab_size, config.d_model)
    table("dec.pos_emb", config.max_len, config.d_model)
    for i in range(config.n_layers):
        norm(f"dec.l{i}.ln1")
        attention(f"dec.l{i}.self")
        norm(f"dec.l{i}.ln2")
        attention(f"dec.l{i}.cross")
        norm(f"dec.l{i}.ln3")
        ffn(f"dec.l{i}.ffn")
    norm("dec.ln_out")

    mat("out.w", config.d_model, config.vocab_size)
    vec("out.b", config.vocab_size)
    return params


def _causal_mask(n: int) -> np.ndarray:
    return ~np.tril(np.ones((n, n), dtype=bool))


class Model:
    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: ModelConfig, seed: int, dtype=np.float32) -> "Model":
        return cls(config, init_parameters(config, seed, dtype))

    # --- internal batched blocks ---------------------------------------

    def _check_len(self, what: str, n: int) -> None:
        if n < 1:
            raise ValueError(f"{what}: sequence is empty")
        if n > self.config.max_len:
            raise ValueError(
                f"{what}: sequence of {n} tokens exceeds max_len {self.config.max_len}"
            )

    def _embed(self, prefix: str, ids: np.ndarray, train: bool, rng) -> Tensor:
        p = self.params
        n = ids.shape[1]
        tok = ad.embedding_lookup(p[f"{prefix}.tok_emb"], ids)
        pos = ad.embedding_lookup(p[f"{prefix}.pos_emb"], np.arange(n))
        x = ad.add(ad.scale(tok, math.sqrt(self.config.d_model)), pos)
        return ad.dropout(x, self.config.dropout, train, rng)

    def _attention(self, name: str, q_in: Tensor, kv_in: Tensor,
                   mask: np.ndarray | None) -> Tensor:
        p = self.params
        h = self.config.n_heads
        b, lq, d = q_in.shape
        lk = kv_in.shape[1]
        dh = d // h

        def heads(t: Tensor, length: int) -> Tensor:
            return ad.transpose(ad.reshape(t, (b, length, h, dh)), (0, 2, 1, 3))

        q = heads(ad.matmul(q_in, p[f"{name}.wq"]), lq)
        k = heads(ad.matmul(kv_in, p[f"{name}.wk"]), lk)
        v = heads(ad.matmul(kv_in, p[f"{name}.wv"]), lk)
        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), dh ** -0.5)
        if mask is not None:
            scores = ad.mask_fill(scores, mask, NEG_INF)
        weights = ad.softmax(scores, axis=-1)
        mixed = ad.reshape(ad.transpose(ad.matmul(weights, v), (0, 2, 1, 3)), (b, lq, d))
        return ad.matmul(mixed, p[f"{name}.wo"])

    def _ffn(self, name: str, x: Tensor) -> Tensor:
        p = self.params
        inner = ad.relu(ad.add(ad.matmul(x, p[f"{name}.w1"]), p[f"{name}.b1"]))
        return ad.add(ad.matmul(inner, p[f"{name}.w2"]), p[f"{name}.b2"])

    def _norm(self, name: str, x: Tensor) -> Tensor:
        p = self.params
        return ad.layernorm(x, p[f"{name}.g"], p[f"{name}.b"])

    def _encoder(self, prefix: str, ids: np.ndarray, train: bool, rng) -> Tensor:
        drop = self.config.dropout
        key_mask = (ids == PAD)[:, None, None, :]
        x = self._embed(prefix, ids, train, rng)
        for i in range(self.config.n_layers):
            base = f"{prefix}.l{i}"
            pre = self._norm(f"{base}.ln1", x)
            a = self._attention(f"{base}.attn", pre, pre, key_mask)
            x = ad.add(x, ad.dropout(a, drop, train, rng))
            f = self._ffn(f"{base}.ffn", self._norm(f"{base}.ln2", x))
            x = ad.add(x, ad.dropout(f, drop, train, rng))
        return self._norm(f"{prefix}.ln_out", x)

    def forward_fused(self, ctx_ids: np.ndarray, src_ids: np.ndarray,
                      train: bool = False, rng=None) -> tuple[Tensor, np.ndarray]:
        """Encode both streams and fuse: H = H_src + Attn(H_src -> H_ctx).

        Returns the fused (batch, src_len, d_model) tensor together with the
        source PAD mask the decoder's cross-attention needs.
        """
        h_src = self._encoder("src", src_ids, train, rng)
        h_ctx = self._encoder("ctx", ctx_ids, train, rng)
        ctx_mask = (ctx_ids == PAD)[:, None, None, :]
        fused = self._attention("fuse.attn", h_src, h_ctx, ctx_mask)
        h = ad.add(h_src, ad.dropout(fused, self.config.dropout, train, rng))
        return h, (src_ids == PAD)

    def decoder_states(self, fused: Tensor, src_pad: np.ndarray, tgt_in: np.ndarray,
                       train: bool = False, rng=None) -> Tensor:
        drop = self.config.dropout
        lt = tgt_in.shape[1]
        self_mask = (tgt_in == PAD)[:, None, None, :] | _causal_mask(lt)[None, None, :, :]
        cross_mask = src_pad[:, None, None, :]
        x = self._embed("dec", tgt_in, train, rng)
        for i in range(self.config.n_layers):
            base = f"dec.l{i}"
            pre = self._norm(f"{base}.ln1", x)
            a = self._attention(f"{base}.self", pre, pre, self_mask)
            x = ad.add(x, ad.dropout(a, drop, train, rng))
            c = self._attention(f"{base}.cross", self._norm(f"{base}.ln2", x),
                                fused, cross_mask)
            x = ad.add(x, ad.dropout(c, drop, train, rng))
            f = self._ffn(f"{base}.ffn", self._norm(f"{base}.ln3", x))
            x = ad.add(x, ad.dropout(f, drop, train, rng))
        return self._norm("dec.ln_out", x)

    def project(self, states: Tensor) -> Tensor:
        return ad.add(ad.matmul(states, self.params["out.w"]), self.params["out.b"])

    # --- single-sentence surface ----------------------------------------

    def encode_fuse(self, context_ids: Sequence[int], source_ids: Sequence[int],
                    train: bool = False, rng=None) -> Tensor:
        """Fused representation of one sentence, shape (src_len, d_model)."""
        self._check_len("context", len(context_ids))
        self._check_len("source", len(source_ids))
        ctx = np.asarray([context_ids], dtype=np.int64)
        src = np.asarray([source_ids], dtype=np.int64)
        h, _ = self.forward_fused(ctx, src, train, rng)
        return ad.reshape(h, (len(source_ids), self.config.d_model))

    def decode_logits(self, fused: Tensor, target_prefix: Sequence[int],
                      train: bool = False, rng=None) -> Tensor:
        """Next-token logits at every prefix position, shape (prefix_len, vocab)."""
        self._check_len("target prefix", len(target_prefix))
        if target_prefix[0] != BOS:
            raise ValueError("decode_logits: target prefix must start with BOS")
        if fused.ndim != 2:
            raise ValueError(f"decode_logits: fused input must be 2-D, got {fused.shape}")
        ls, d = fused.shape
        h = ad.reshape(fused, (1, ls, d))
        tgt = np.asarray([target_prefix], dtype=np.int64)
        src_pad = np.zeros((1, ls), dtype=bool)
        states = self.decoder_states(h, src_pad, tgt, train, rng)
        logits = self.project(states)
        return ad.reshape(logits, (len(target_prefix), self.config.vocab_size))
