"""Desk-scale semantic building reconstruction and characteristic estimation.

The package covers the full loop: procedural buildings with analytically
known window/wall areas, posed multi-modal rendering, a trainable SDF +
semantics field, mesh extraction, and window-to-wall ratio / footprint
estimation with image-space baselines for comparison.
"""

__version__ = "0.1.0"

from .semantics import SemanticClass

__all__ = ["SemanticClass", "__version__"]
