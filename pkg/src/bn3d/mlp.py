"""Plain fully-connected layers with hand-written forward/backward.

Activation tags: "softplus" (scaled, smooth, used for the SDF trunk so
finite-difference spatial gradients stay stable), "relu" (color/semantic
trunks), "sigmoid" (color output squashing), "none" (logits).

Forward passes compute the activation derivative alongside the value from
one shared exponential, since the derivative is always needed again in the
backward pass and transcendentals dominate the step cost on CPU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Branchless numerically stable sigmoid: one exp of -|x|."""
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def act_forward_grad(pre: np.ndarray, kind: str, beta: float = 100.0):
    """(activation(pre), d activation / d pre)."""
    if kind == "none":
        return pre, None  # gradient is identity; callers skip the multiply
    if kind == "relu":
        grad = (pre > 0).astype(pre.dtype)
        return pre * grad, grad
    if kind == "sigmoid":
        out = stable_sigmoid(pre)
        return out, out * (1.0 - out)
    if kind == "smoothrelu":
        # 0.5 * (x + sqrt(x^2 + c)): C-infinity, strictly monotone, relu-like
        # with smoothing width sqrt(c) = 1/beta; sqrt is far cheaper than exp
        root = pre * pre
        root += 1.0 / (beta * beta)
        np.sqrt(root, out=root)
        out = pre + root
        out *= 0.5
        grad = pre / root
        grad += 1.0
        grad *= 0.5
        return out, grad
    if kind == "softplus":
        z = beta * pre
        e = np.exp(-np.abs(z))
        log_part = np.log1p(e) / beta
        out = np.maximum(pre, 0.0) + log_part
        grad = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return out, grad
    raise ValueError(f"unknown activation {kind!r}")


def act_forward(pre: np.ndarray, kind: str, beta: float = 100.0) -> np.ndarray:
    if kind == "none":
        return pre
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "sigmoid":
        return stable_sigmoid(pre)
    if kind == "smoothrelu":
        return 0.5 * (pre + np.sqrt(pre * pre + 1.0 / (beta * beta)))
    if kind == "softplus":
        z = beta * pre
        return np.maximum(pre, 0.0) + np.log1p(np.exp(-np.abs(z))) / beta
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class Mlp:
    """Weight/bias chain; ``dims`` includes input and output widths."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_act: str
    out_act: str
    softplus_beta: float = 100.0

    @staticmethod
    def create(dims: list[int], hidden_act: str, out_act: str,
               gen: np.random.Generator, softplus_beta: float = 100.0) -> "Mlp":
        """Uniform fan-in initialization: W ~ U(+-sqrt(6 / fan_in))."""
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            bound = np.sqrt(6.0 / d_in)
            weights.append(gen.uniform(-bound, bound, size=(d_in, d_out)))
            biases.append(np.zeros(d_out))
        return Mlp(weights, biases, hidden_act, out_act, softplus_beta)

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def activation_at(self, layer: int) -> str:
        return self.out_act if layer == self.num_layers - 1 else self.hidden_act

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """Returns output, or (output, cache); cache holds (input, act-grad)."""
        cache = [] if want_cache else None
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = h @ w + b
            if want_cache:
                out, dact = act_forward_grad(pre, self.activation_at(i), self.softplus_beta)
                cache.append((h, dact))
            else:
                out = act_forward(pre, self.activation_at(i), self.softplus_beta)
            h = out
        return (h, cache) if want_cache else h

    def backward(self, cache, d_out: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (d_input, [(dW, db), ...]) with one entry per layer.
        """
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * self.num_layers
        g = d_out
        for i in range(self.num_layers - 1, -1, -1):
            h, dact = cache[i]
            dpre = g if dact is None else g * dact
            grads[i] = (h.T @ dpre, dpre.sum(axis=0))
            g = dpre @ self.weights[i].T
        return g, grads

    def check_finite(self, x: np.ndarray, context: str) -> None:
        """Raise :class:`NonFiniteError` naming the first bad layer."""
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = act_forward(h @ w + b, self.activation_at(i), self.softplus_beta)
            if not np.all(np.isfinite(h)):
                raise NonFiniteError(
                    f"non-finite activation in {context} layer {i}", block=f"{context}.layer{i}"
                )

    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))
