"""Deterministic fan-out of one master seed into named sub-streams."""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_for"]


def derive_seed(master: int, name: str) -> int:
    """Hash (master, name) into a stable 63-bit seed.

    The same pair always maps to the same value, and distinct names give
    streams that are independent for every practical purpose.
    """
    digest = hashlib.sha256(f"{int(master)}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def rng_for(master: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, name))
