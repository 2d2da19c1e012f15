"""Deterministic seed derivation.

Every randomized stage draws from its own RNG stream whose seed is a
stable hash of the master seed plus the stage coordinates (stage name,
variety, algorithm, round, ...). Python's builtin ``hash`` is salted per
process, so a cryptographic digest is used instead; the same inputs give
the same seed on any platform or run.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *parts) -> int:
    """Derive a 32-bit seed from a master seed and stage coordinates.

    Parts may be strings, ints, floats or None; they are canonicalised
    into the digest input so ``derive_seed(7, "tune", "Q200", 0)`` is
    stable across processes.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest()[:4], "big")


def rng_for(master: int, *parts) -> np.random.Generator:
    """Generator seeded by :func:`derive_seed` of the same arguments."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *parts)))
