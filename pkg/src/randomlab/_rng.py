"""Seed derivation for reproducible, schedule-independent random streams."""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    digest = hashlib.blake2b(str(label).encode(), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *labels) -> np.random.Generator:
    """Return a Philox generator keyed by ``seed`` and a path of labels.

    The same (seed, labels) pair always yields the same stream, independent
    of how many other streams were created before it.
    """
    spawn_key = tuple(_label_key(lab) for lab in labels)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def subseed(seed: int, *labels) -> int:
    """Derive a 63-bit integer seed from ``seed`` and labels."""
    spawn_key = tuple(_label_key(lab) for lab in labels)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1))


def as_seed(rng) -> int:
    """Accept an int seed or a Generator and return an int seed."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    if rng is None:
        return 0
    return int(rng)
