"""Deterministic random-stream derivation.

Every source of randomness in this package is a substream derived from a
single master seed plus a coordinate tuple, e.g. ``("tree", 17)`` or
``("model", subgroup, fold, random_state)``.  The derivation hashes the
coordinates with SHA-256, so streams are stable across platforms, Python
versions, and process boundaries; nothing is ever seeded from the clock.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *coords) -> int:
    """Return a 64-bit seed for the substream at ``coords``.

    Coordinates may be ints or strings; they are joined with ``/`` so that
    ("a", 12) and ("a1", 2) cannot collide.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode("ascii"))
    for c in coords:
        h.update(b"/")
        h.update(str(c).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def substream(master_seed: int, *coords) -> np.random.Generator:
    """Return an independent numpy Generator for the given coordinates."""
    return np.random.default_rng(derive_seed(master_seed, *coords))
