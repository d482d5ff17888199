"""Deterministic derivation of independent seed streams."""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k) & 0xFFFFFFFF
    return zlib.crc32(str(k).encode("utf-8"))


def derive_seed(seed, *keys) -> int:
    """Child seed of ``seed`` identified by ``keys`` (ints or strings).

    Distinct key paths give statistically independent streams; the same path
    always gives the same seed.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    if seed is None:
        seed = 0
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
