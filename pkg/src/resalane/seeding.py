"""Deterministic per-name random streams.

Parameters are initialized from a stream keyed by (seed, parameter name),
so adding or removing one component never shifts the draws of another and
runs are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def named_rng(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.blake2s(name.encode("utf-8")).digest()[:8]
    key = int.from_bytes(digest, "little")
    return np.random.default_rng(np.random.SeedSequence([seed, key]))
