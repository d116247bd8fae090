"""Run configuration: named profiles, config files, and flag overrides.

Two profiles ship with the package. `paper` carries the full-scale
hyperparameters; `desk` shrinks the model and warmup so the whole pipeline
runs on a workstation in minutes. Precedence is profile defaults, then
config file entries, then explicit flag overrides.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .model import ModelConfig
from .search import DecodeConfig
from .training import TrainConfig

__all__ = ["RunConfig", "ConfigError", "PROFILES", "profile_config",
           "parse_config_file", "build_run_config"]


class ConfigError(ValueError):
    """Unknown key, malformed line, or unusable value."""


@dataclass(frozen=True)
class RunConfig:
    profile: str = "paper"
    # model
    n_layers: int = 6
    n_heads: int = 8
    d_model: int = 512
    d_ff: int = 2048
    max_len: int = 140
    dropout: float = 0.3
    vocab_size: int = 40000
    # training
    base_lr: float = 0.2
    warmup_steps: int = 16000
    batch_size: int = 30
    patience: int = 7
    max_epochs: int = 100
    adapt_loss: bool = False
    # decoding
    beam_size: int = 4
    length_penalty: float = 0.6
    max_decode_len: int = 140
    # data
    context_mode: str = "prev"
    k: int = 2
    seed: int = 0

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            d_model=self.d_model,
            d_ff=self.d_ff,
            max_len=self.max_len,
            dropout=self.dropout,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            base_lr=self.base_lr,
            warmup_steps=self.warmup_steps,
            batch_size=self.batch_size,
            patience=self.patience,
            adapt_loss=self.adapt_loss,
            seed=self.seed,
            max_epochs=self.max_epochs,
        )

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(
            beam_size=self.beam_size,
            length_penalty=self.length_penalty,
            max_decode_len=self.max_decode_len,
        )


PROFILES: dict[str, dict] = {
    "paper": dict(
        profile="paper",
        n_layers=6, n_heads=8, d_model=512, d_ff=2048, max_len=140,
        dropout=0.3, vocab_size=40000,
        base_lr=0.2, warmup_steps=16000, batch_size=30, patience=7,
        max_epochs=100,
        beam_size=4, length_penalty=0.6, max_decode_len=140,
    ),
    "desk": dict(
        profile="desk",
        n_layers=2, n_heads=4, d_model=64, d_ff=256, max_len=64,
        dropout=0.3, vocab_size=1000,
        base_lr=0.2, warmup_steps=400, batch_size=32, patience=7,
        max_epochs=40,
        beam_size=4, length_penalty=0.6, max_decode_len=60,
    ),
}

_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def profile_config(name: str) -> RunConfig:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}, expected one of {sorted(PROFILES)}")
    return RunConfig(**PROFILES[name])


def _coerce(key: str, value) -> object:
    ftype = _FIELDS[key]
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if ftype == "bool" or ftype is bool:
            lowered = text.lower()
            if lowered not in _BOOL_WORDS:
                raise ValueError(f"expected a boolean, got {text!r}")
            return _BOOL_WORDS[lowered]
        if ftype == "int" or ftype is int:
            return int(text)
        if ftype == "float" or ftype is float:
            return float(text)
        return text
    except ValueError as e:
        raise ConfigError(f"config key {key!r}: {e}") from None


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read `key = value` lines; blank lines and #-comments are ignored."""
    entries: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}: line {n}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def build_run_config(profile: str | None = None, config_file: str | Path | None = None,
                     overrides: dict | None = None) -> RunConfig:
    """Merge defaults < file < overrides into a validated RunConfig."""
    file_entries = parse_config_file(config_file) if config_file else {}
    for key in file_entries:
        if key != "profile" and key not in _FIELDS:
            raise ConfigError(f"{config_file}: unknown config key {key!r}")
    chosen = profile or file_entries.get("profile") or "paper"
    cfg = profile_config(chosen)

    values = dataclasses.asdict(cfg)
    for key, raw in file_entries.items():
        if key == "profile":
            continue
        values[key] = _coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    merged = RunConfig(**values)
    # surface bad numbers now rather than deep inside a run
    try:
        merged.model_config(vocab_size=max(5, merged.vocab_size))
        merged.train_config()
        merged.decode_config()
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if merged.context_mode not in ("prev", "random", "mix", "self"):
        raise ConfigError(f"unknown context_mode {merged.context_mode!r}")
    if merged.k < 1:
        raise ConfigError(f"k must be >= 1, got {merged.k}")
    return merged
