"""Deterministic RNG derivation.

All randomness flows from integer key tuples through numpy SeedSequence,
so any component can be re-derived independently of execution order or
process boundaries. Python's builtin hash() is salted per process and is
never used for seeding.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_rng", "stable_seed"]


def derive_rng(*keys: int) -> np.random.Generator:
    """Generator seeded from a tuple of non-negative integers."""
    return np.random.default_rng(np.random.SeedSequence(tuple(int(k) for k in keys)))


def stable_seed(base_seed: int, name: str) -> int:
    """63-bit seed derived from a base seed and a label, stable across
    processes and platforms."""
    digest = hashlib.sha256(f"{base_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF
