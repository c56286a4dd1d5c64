"""Sinusoidal input encoding.

Layout for input dimension d and F frequency octaves, in order:
``[x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(F-1) pi x), cos(2^(F-1) pi x)]``
where each block has width d, giving d * (1 + 2F) outputs. F = 0 is the
identity passthrough.
"""

from __future__ import annotations

import numpy as np


def encoded_dim(dim: int, frequencies: int) -> int:
    return dim * (1 + 2 * frequencies)


def positional_encode(x: np.ndarray, frequencies: int) -> np.ndarray:
    if frequencies < 0:
        raise ValueError("frequencies must be >= 0")
    x = np.atleast_2d(x)
    if frequencies == 0:
        return x.copy()
    parts = [x]
    for k in range(frequencies):
        arg = (np.pi * 2.0**k) * x
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    return np.concatenate(parts, axis=1)
