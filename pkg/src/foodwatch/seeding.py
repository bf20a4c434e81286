"""Deterministic seed derivation.

A single run seed fans out to per-module (and per-entity) sub-seeds through a
keyed hash, so any stage can be re-run in isolation and parallel schedules
reproduce the serial output. Python's builtin ``hash`` is randomized per
process and must never be used here.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *parts: object) -> int:
    """Map (seed, parts...) to a stable 64-bit sub-seed.

    Parts are joined by their ``str`` form, so callers should pass primitives
    (module names, user ids, day indices) with stable string representations.
    """
    payload = ":".join([str(int(seed))] + [str(p) for p in parts]).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big")


def make_rng(seed: int, *parts: object) -> np.random.Generator:
    """A numpy Generator seeded from ``derive_seed(seed, *parts)``."""
    return np.random.default_rng(derive_seed(seed, *parts))
