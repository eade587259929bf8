"""Deterministic stream derivation for seeds and dropout masks.

All randomness in the package flows through counter-based Philox generators
keyed by SHA-256 digests of (root seed, purpose tags).  Streams derived from
distinct tags are independent; the same tags always reproduce the same
stream, across processes and platforms.
"""

from __future__ import annotations

import hashlib
from typing import Iterable

import numpy as np


def _digest(parts: Iterable[object]) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(b"b")
            h.update(part)
        else:
            h.update(b"s")
            h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def derive_key(*parts: object) -> int:
    """128-bit Philox key derived from arbitrary tag parts."""
    return int.from_bytes(_digest(parts)[:16], "little")


def rng_for(*parts: object) -> np.random.Generator:
    """Independent generator for the stream named by ``parts``."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))


def dropout_mask(key_parts: Iterable[object], size: int, rate: float) -> np.ndarray:
    """Boolean keep-mask of ``size`` units, each kept with probability 1-rate.

    The mask is a pure function of the key parts, so repeated scoring with
    the same key reproduces it exactly.
    """
    gen = np.random.Generator(np.random.Philox(key=derive_key(*key_parts)))
    return gen.random(size) >= rate
