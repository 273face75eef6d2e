"""Labelled, counter-addressed random substreams derived from one master seed."""
from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Generator for ``(label, index)`` under ``seed``.

    The stream depends only on the triple, never on how many other streams
    were drawn before it, so chunked or reordered work reproduces exactly.
    """
    key = (zlib.crc32(label.encode()), int(index))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)))
