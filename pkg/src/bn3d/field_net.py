"""The trainable field: SDF trunk + color head + semantic head + sharpness.

The network operates in normalized coordinates: world points are mapped
through ``x' = (x - center) / scale`` with ``scale`` the scene bounding
radius, so every scene fits the unit sphere and the geometric
initialization sphere (radius ``s_bias``) encloses it. SDF values and
spatial gradients are therefore in normalized units; the zero-level set is
unaffected, which is all mesh extraction and opacity need.

The semantic head consumes only the geometric feature vector, never the
view direction, so semantics are view-invariant by construction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import rng as _rng
from .encoding import encoded_dim, positional_encode
from .errors import Bn3dError
from .mlp import Mlp, act_forward

SCENE_BOX_HALF = 1.5  # normalized half-extent; equals the init sphere radius
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FieldConfig:
    pos_freqs: int = 6
    dir_freqs: int = 4
    sdf_hidden: int = 8
    sdf_width: int = 256
    color_hidden: int = 4
    color_width: int = 256
    semantic_hidden: int = 2
    semantic_width: int = 128
    num_classes: int = 5
    s_init: float = 2.0
    s_bias: float = 1.5
    smooth_beta: float = 100.0
    grad_h_scale: float = 1e-3  # spatial FD step = scale * scene-box diagonal

    @property
    def feature_dim(self) -> int:
        return self.sdf_width

    @property
    def grad_h(self) -> float:
        return self.grad_h_scale * 2.0 * SCENE_BOX_HALF * np.sqrt(3.0)

    def arch_hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


class FieldNetwork:
    def __init__(self, config: FieldConfig, bound_center: np.ndarray,
                 bound_radius: float, seed: int = 0):
        self.config = config
        self.bound_center = np.asarray(bound_center, dtype=float)
        self.bound_radius = float(bound_radius)
        self.num_classes = config.num_classes
        gen = _rng.stream(seed, 60)
        enc_x = encoded_dim(3, config.pos_freqs)
        enc_v = encoded_dim(3, config.dir_freqs)
        self.sdf_mlp = Mlp.create(
            [enc_x] + [config.sdf_width] * config.sdf_hidden + [1 + config.feature_dim],
            hidden_act="smoothrelu", out_act="none", gen=gen,
            softplus_beta=config.smooth_beta)
        self.color_mlp = Mlp.create(
            [enc_x + enc_v + 3 + config.feature_dim]
            + [config.color_width] * config.color_hidden + [3],
            hidden_act="relu", out_act="sigmoid", gen=gen)
        self.semantic_mlp = Mlp.create(
            [config.feature_dim] + [config.semantic_width] * config.semantic_hidden
            + [config.num_classes],
            hidden_act="relu", out_act="none", gen=gen)
        self.rho = float(np.log(config.s_init))  # s = exp(rho) keeps s > 0

    # -- coordinates ---------------------------------------------------------

    @property
    def scale(self) -> float:
        return self.bound_radius

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.bound_center) / self.scale

    def inv_std(self) -> float:
        return float(np.exp(self.rho))

    # -- parameter vector ----------------------------------------------------

    def blocks(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for name, mlp in (("sdf", self.sdf_mlp), ("color", self.color_mlp),
                          ("semantic", self.semantic_mlp)):
            for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
                out.append((f"{name}.w{i}", w))
                out.append((f"{name}.b{i}", b))
        return out

    def param_count(self) -> int:
        return sum(arr.size for _, arr in self.blocks()) + 1

    def flatten(self) -> np.ndarray:
        parts = [arr.ravel() for _, arr in self.blocks()]
        parts.append(np.array([self.rho]))
        return np.concatenate(parts)

    def load_flat(self, vec: np.ndarray) -> None:
        if vec.size != self.param_count():
            raise Bn3dError("parameter vector length mismatch")
        i = 0
        for _, arr in self.blocks():
            arr[...] = vec[i : i + arr.size].reshape(arr.shape)
            i += arr.size
        self.rho = float(vec[i])

    def block_slices(self) -> list[tuple[str, slice]]:
        out = []
        i = 0
        for name, arr in self.blocks():
            out.append((name, slice(i, i + arr.size)))
            i += arr.size
        out.append(("rho", slice(i, i + 1)))
        return out

    # -- evaluation ----------------------------------------------------------

    def sdf(self, x: np.ndarray) -> np.ndarray:
        """SDF (normalized units) at world points, trunk only."""
        return self._sdf_normalized(self.normalize(x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Central-difference spatial gradient in normalized units."""
        h = self.config.grad_h
        xn = self.normalize(x)
        g = np.empty_like(xn)
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = h
            g[:, axis] = (self._sdf_normalized(xn + e) - self._sdf_normalized(xn - e)) / (2.0 * h)
        return g

    def _sdf_normalized(self, xn: np.ndarray) -> np.ndarray:
        enc = positional_encode(xn, self.config.pos_freqs)
        h = enc
        mlp = self.sdf_mlp
        for i in range(mlp.num_layers - 1):
            h = act_forward(h @ mlp.weights[i] + mlp.biases[i], mlp.activation_at(i),
                            mlp.softplus_beta)
        w_last = mlp.weights[-1]
        return h @ w_last[:, 0] + mlp.biases[-1][0]

    def forward(self, x: np.ndarray, v: np.ndarray):
        """(f, feature, color, logits) at world points/directions."""
        xn = self.normalize(x)
        enc_x = positional_encode(xn, self.config.pos_freqs)
        sdf_out = self.sdf_mlp.forward(enc_x)
        if not np.all(np.isfinite(sdf_out)):
            self.sdf_mlp.check_finite(enc_x, "sdf")
        f = sdf_out[:, 0]
        feat = sdf_out[:, 1:]
        normals = self.gradient(x)
        enc_v = positional_encode(np.atleast_2d(v), self.config.dir_freqs)
        if enc_v.shape[0] == 1 and enc_x.shape[0] > 1:
            enc_v = np.broadcast_to(enc_v, (enc_x.shape[0], enc_v.shape[1]))
        cin = np.concatenate([enc_x, enc_v, normals, feat], axis=1)
        color = self.color_mlp.forward(cin)
        if not np.all(np.isfinite(color)):
            self.color_mlp.check_finite(cin, "color")
        logits = self.semantic_mlp.forward(feat)
        if not np.all(np.isfinite(logits)):
            self.semantic_mlp.check_finite(feat, "semantic")
        return f, feat, color, logits

    def evaluate(self, x: np.ndarray, v: np.ndarray):
        """Field-interface view: (f, color, logits)."""
        f, _, color, logits = self.forward(x, v)
        return f, color, logits


def field_forward(net: FieldNetwork, x: np.ndarray, v: np.ndarray):
    return net.forward(x, v)


def spatial_gradient(net: FieldNetwork, x: np.ndarray) -> np.ndarray:
    return net.gradient(x)


def sdf_init_sphere(net: FieldNetwork, bias: float | None = None, steps: int = 500,
                    seed: int = 0, lr: float = 2e-3, batch: int = 1024) -> None:
    """Regress the SDF trunk to a centered sphere of radius ``bias``.

    Raises if the fit misses the tolerance, which signals a broken
    architecture or learning-rate configuration rather than bad luck.
    """
    from .optim import AdamState, adam_step

    bias = net.config.s_bias if bias is None else bias
    if bias <= 0:
        raise Bn3dError("sphere initialization bias must be positive")
    half = SCENE_BOX_HALF * 1.1
    gen = _rng.stream(seed, 61)
    mlp = net.sdf_mlp

    def flat_params():
        return np.concatenate([np.concatenate([w.ravel(), b.ravel()])
                               for w, b in zip(mlp.weights, mlp.biases)])

    def load(vec):
        i = 0
        for w, b in zip(mlp.weights, mlp.biases):
            w[...] = vec[i : i + w.size].reshape(w.shape)
            i += w.size
            b[...] = vec[i : i + b.size]
            i += b.size

    params = flat_params()
    state = AdamState.for_size(params.size)
    for _ in range(steps):
        xn = gen.uniform(-half, half, size=(batch, 3))
        target = np.linalg.norm(xn, axis=1) - bias
        enc = positional_encode(xn, net.config.pos_freqs)
        out, cache = mlp.forward(enc, want_cache=True)
        resid = out[:, 0] - target
        d_out = np.zeros_like(out)
        d_out[:, 0] = 2.0 * resid / batch
        _, grads = mlp.backward(cache, d_out)
        gvec = np.concatenate([np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])
        adam_step(params, gvec, state, lr)
        load(params)

    probe = _rng.stream(seed, 62).uniform(-half, half, size=(10_000, 3))
    err = np.mean(np.abs(net._sdf_normalized(probe) - (np.linalg.norm(probe, axis=1) - bias)))
    if err > 0.05 * bias:
        raise Bn3dError(
            f"sphere initialization failed: mean |f - target| = {err:.4f} > {0.05 * bias:.4f}"
        )


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(path, net: FieldNetwork, step: int,
                    adam_m: np.ndarray | None = None,
                    adam_v: np.ndarray | None = None,
                    adam_t: int = 0) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(net.config),
        "arch_hash": net.config.arch_hash(),
        "bound_center": net.bound_center.tolist(),
        "bound_radius": net.bound_radius,
        "step": step,
        "adam_t": adam_t,
    }
    arrays = {"params": net.flatten(), "meta": np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    if adam_m is not None:
        arrays["adam_m"] = adam_m
        arrays["adam_v"] = adam_v
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path, expect_config: FieldConfig | None = None):
    """Returns (net, meta dict with step/adam state)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise Bn3dError(f"unsupported checkpoint version {meta.get('version')}")
        config = FieldConfig(**meta["config"])
        if expect_config is not None and expect_config.arch_hash() != config.arch_hash():
            raise Bn3dError("checkpoint architecture hash does not match the requested config")
        if meta["arch_hash"] != config.arch_hash():
            raise Bn3dError("checkpoint architecture hash is inconsistent with its config")
        net = FieldNetwork(config, np.array(meta["bound_center"]), meta["bound_radius"])
        net.load_flat(data["params"])
        out = {"step": int(meta["step"]), "adam_t": int(meta.get("adam_t", 0))}
        if "adam_m" in data:
            out["adam_m"] = data["adam_m"].copy()
            out["adam_v"] = data["adam_v"].copy()
    return net, out
