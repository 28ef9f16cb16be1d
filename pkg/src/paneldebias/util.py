"""Small shared helpers (deterministic seeding)."""

from __future__ import annotations

import numpy as np


def derive_seed(*parts: int) -> int:
    """Derive a child seed from an ordered tuple of integers.

    Uses :class:`numpy.random.SeedSequence` hashing so that nearby parent
    seeds yield decorrelated streams. The same parts always produce the
    same child seed, which is what makes parallel and serial execution of
    seeded pipelines agree exactly.
    """
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def frozen(arr: np.ndarray) -> np.ndarray:
    """Return a C-contiguous float copy that refuses in-place writes."""
    out = np.ascontiguousarray(arr, dtype=float)
    out.setflags(write=False)
    return out
