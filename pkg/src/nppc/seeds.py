"""Deterministic random-stream derivation.

Every stochastic operation in this package draws from a substream that is a
pure function of a run seed plus a structural key (candidate parameters,
trial index, purpose tag, ...).  Results are therefore identical for any
worker count, chunk size or evaluation order.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

# purpose tags used as the last spawn-key component
DOMAIN_SAMPLE = 0   # population response sampling
DOMAIN_TIE = 1      # MVD tie-breaking
DOMAIN_CHANCE = 2   # kappa chance-agreement draws
DOMAIN_SPLIT = 3    # CF train/test holdout selection
DOMAIN_KMEANS = 4   # k-means initialisation
DOMAIN_SYNTH = 5    # dataset synthesis
DOMAIN_BOOTSTRAP = 6


def seed_sequence(seed) -> np.random.SeedSequence:
    """Coerce an int seed or an existing SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def substream(seed, *key: int) -> np.random.SeedSequence:
    """Child SeedSequence for ``key``, appended to any existing spawn key.

    Keys must be non-negative ints; values >= 2**32 are split into 32-bit
    limbs so arbitrarily large indices stay valid spawn-key entries.
    """
    parts: list[int] = []
    for k in key:
        k = int(k)
        if k < 0:
            raise ValueError("substream keys must be non-negative")
        while k >= 1 << 32:
            parts.append(k & 0xFFFFFFFF)
            k >>= 32
        parts.append(k)
    base = seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=base.entropy, spawn_key=tuple(base.spawn_key) + tuple(parts)
    )


def generator(seed, *key: int) -> np.random.Generator:
    """PCG64 generator on the ``key`` substream of ``seed``."""
    return np.random.default_rng(substream(seed, *key))


def value_key(*values: float) -> tuple[int, int, int, int]:
    """Stable 128-bit key from the IEEE-754 bits of ``values``.

    Used to key a grid candidate's randomness by its parameter values rather
    than its enumeration index, so scores do not depend on how a grid is
    ordered or partitioned.
    """
    digest = hashlib.sha256(struct.pack("<%dd" % len(values), *values)).digest()
    return struct.unpack("<4I", digest[:16])
