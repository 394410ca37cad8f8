"""Seed derivation shared by every stochastic component.

All randomness in the engine flows from 64-bit seeds combined with
:func:`mix64`, so a trial, scene, or rollout can be regenerated from its
seed alone, independent of execution order or worker count.
"""

from __future__ import annotations

import random

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def splitmix64_finalize(z: int) -> int:
    """SplitMix64 output finalizer (Stafford variant 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Fold any number of integers into one 64-bit seed.

    Each input is reduced mod 2**64, xored into the running state, advanced by
    the golden gamma and finalized, so ``mix64(a, b) != mix64(b, a)`` in general.
    """
    h = 0
    for v in values:
        h = splitmix64_finalize(((h ^ (v & MASK64)) + GOLDEN_GAMMA) & MASK64)
    return h


def label_seed(label: str) -> int:
    """Stable 64-bit integer for a text label (FNV-1a), for salting seeds."""
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def rng_for(*values: int | str) -> random.Random:
    """A ``random.Random`` seeded from ``mix64`` over ints and salted labels."""
    ints = [label_seed(v) if isinstance(v, str) else int(v) for v in values]
    return random.Random(mix64(*ints))
