"""Labeled seed derivation.

Every random stream is a pure function of ``(master_seed, *labels)`` so work
can be split across threads in any order without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *labels) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed) & MASK64).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(master_seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *labels))
