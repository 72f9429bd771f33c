"""Deterministic random streams.

Every random draw in the package comes from a Philox generator whose key is
derived by hashing a root seed together with a path of string labels. Streams
are therefore independent of call order and identical across processes, which
is what makes fixed-seed runs byte-reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, labels: tuple) -> bytes:
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for label in labels:
        if isinstance(label, int):
            h.update(b"i" + label.to_bytes(8, "little", signed=True))
        else:
            part = str(label).encode()
            h.update(b"s" + len(part).to_bytes(4, "little") + part)
    return h.digest()


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for (seed, labels)."""
    key = int.from_bytes(_digest(seed, labels)[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *labels) -> int:
    """Stable 63-bit sub-seed for (seed, labels), for logging and re-seeding."""
    return int.from_bytes(_digest(seed, labels)[16:24], "little") >> 1
