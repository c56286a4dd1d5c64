"""Training losses and the warmup + cosine learning-rate schedule.

All three losses are sums over the batch (not means): per-ray L1 color
residual, squared eikonal deviation per sample point, and multi-class
cross-entropy on softmaxed composited logits. The logged per-ray means are
derived views for readability only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Bn3dError

EPS_PROB = 1e-7  # probability floor inside the cross-entropy log


@dataclass(frozen=True)
class LossBreakdown:
    color: float
    eikonal: float
    semantic: float
    lambda1: float
    lambda2: float

    @property
    def total(self) -> float:
        return self.color + self.lambda1 * self.eikonal + self.lambda2 * self.semantic


def color_loss(rendered: np.ndarray, target: np.ndarray) -> float:
    """Sum over rays of the L1 norm of the RGB residual."""
    rendered = np.atleast_2d(rendered)
    target = np.atleast_2d(target)
    if rendered.shape != target.shape:
        raise Bn3dError("rendered/target shape mismatch")
    return float(np.sum(np.abs(rendered - target)))


def eikonal_loss(gradients: np.ndarray) -> float:
    """Sum of squared deviations of gradient norms from 1."""
    norms = np.linalg.norm(np.atleast_2d(gradients), axis=-1)
    return float(np.sum((norms - 1.0) ** 2))


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def semantic_loss(logits: np.ndarray, targets: np.ndarray) -> float:
    """Cross-entropy of softmaxed composited logits against one-hot labels."""
    logits = np.atleast_2d(logits)
    targets = np.asarray(targets, dtype=int)
    n_classes = logits.shape[-1]
    if np.any(targets < 0) or np.any(targets >= n_classes):
        raise Bn3dError(f"semantic target out of range [0, {n_classes})")
    probs = softmax(logits)
    picked = probs[np.arange(len(targets)), targets]
    return float(np.sum(-np.log(np.maximum(picked, EPS_PROB))))


def lr_at(step: int, warmup: int, total: int, peak: float, floor: float) -> float:
    """Linear warmup to ``peak`` then cosine decay to ``floor``."""
    if not (0 <= step <= total):
        raise Bn3dError(f"step {step} outside [0, {total}]")
    if step <= warmup:
        return peak * step / warmup
    progress = (step - warmup) / (total - warmup)
    return floor + (peak - floor) * 0.5 * (1.0 + np.cos(np.pi * progress))
