"""Binary checkpoint container.

Layout: 5-byte magic, little-endian uint32 format version, uint64 header
length, a canonical JSON header (model config, tokenizer reference, and a
sorted parameter manifest of name/shape entries), then the raw
little-endian float32 payloads in manifest order. Canonical JSON plus the
sorted manifest make saves byte-for-byte reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .model import Model, ModelConfig

__all__ = ["MAGIC", "FORMAT_VERSION", "Checkpoint", "CheckpointError",
           "save_checkpoint", "load_checkpoint"]

MAGIC = b"DCTX1"
FORMAT_VERSION = 1
_PAYLOAD_DTYPE = "<f4"


class CheckpointError(ValueError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, Tensor]
    bpe_ref: str | None
    version: int = FORMAT_VERSION

    def to_model(self) -> Model:
        return Model(self.config, self.params)


def save_checkpoint(path: str | Path, model: Model, bpe_ref: str | None = None) -> None:
    names = sorted(model.params)
    manifest = [[name, list(model.params[name].shape)] for name in names]
    header = {
        "config": model.config.to_dict(),
        "bpe": bpe_ref,
        "params": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"),
                              ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name in names:
            fh.write(np.ascontiguousarray(
                model.params[name].data.astype(_PAYLOAD_DTYPE, copy=False)).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 12 or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    at = len(MAGIC)
    (version,) = struct.unpack_from("<I", raw, at)
    at += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    (header_len,) = struct.unpack_from("<Q", raw, at)
    at += 8
    if at + header_len > len(raw):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[at:at + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from None
    at += header_len

    try:
        config = ModelConfig.from_dict(header["config"])
        manifest = header["params"]
        bpe_ref = header.get("bpe")
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: invalid header contents ({e})") from None

    params: dict[str, Tensor] = {}
    itemsize = np.dtype(_PAYLOAD_DTYPE).itemsize
    for entry in manifest:
        name, shape = entry[0], tuple(int(s) for s in entry[1])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * itemsize
        if at + nbytes > len(raw):
            raise CheckpointError(f"{path}: payload for {name!r} is truncated")
        data = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE, count=count, offset=at)
        params[name] = Tensor(data.reshape(shape).copy(), requires_grad=True, name=name)
        at += nbytes
    if at != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - at} unexpected trailing bytes")
    return Checkpoint(config=config, params=params, bpe_ref=bpe_ref, version=version)
