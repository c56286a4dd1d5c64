"""Seedable, portable random streams.

Every random decision in the pipeline draws from a Philox counter-based
generator keyed by a tuple of integers (e.g. ``(seed,)`` for pose sampling,
``(seed, step)`` for training batches, ``(seed, image_id)`` for per-image
ray jitter). Philox output is platform-independent, and keying streams by
purpose means adding a consumer never perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _mix_key(parts: tuple[int, ...]) -> np.ndarray:
    data = b"bn3d" + b"".join(int(p).to_bytes(8, "little", signed=True) for p in parts)
    digest = hashlib.sha256(data).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64)


def stream(*parts: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``parts``."""
    return np.random.Generator(np.random.Philox(key=_mix_key(parts)))
