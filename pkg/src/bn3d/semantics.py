"""Semantic classes and their fixed rendering palette."""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class SemanticClass(IntEnum):
    """Per-surface label. Ids are contiguous from 0; BACKGROUND is reserved
    for empty space and never counts as a building class."""

    WALL = 0
    WINDOW = 1
    ROOF = 2
    DOOR = 3
    BACKGROUND = 4


NUM_CLASSES = len(SemanticClass)

BUILDING_CLASSES = (
    SemanticClass.WALL,
    SemanticClass.WINDOW,
    SemanticClass.ROOF,
    SemanticClass.DOOR,
)

# Flat albedo per class, chosen well-separated so the color head gets signal.
ALBEDO = np.array(
    [
        [0.82, 0.78, 0.72],  # wall: warm light gray
        [0.15, 0.25, 0.50],  # window: dark glass blue
        [0.55, 0.18, 0.12],  # roof: brick red
        [0.35, 0.22, 0.10],  # door: brown
        [0.00, 0.00, 0.00],  # background: unused (BACKGROUND_COLOR applies)
    ]
)

# Exactly representable in 8-bit so quantized image targets round-trip.
BACKGROUND_COLOR = np.array([158.0, 186.0, 217.0]) / 255.0
