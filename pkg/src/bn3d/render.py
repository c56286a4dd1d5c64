"""Two renderers over one field interface.

Ground truth comes from exact sphere tracing of the analytic scene with
flat albedo + a fixed Lambert light. Training and evaluation use the
SDF-opacity volume renderer: per-ray stratified samples, opacity from
sigmoid-transformed SDF differences of consecutive samples, and front-to-
back compositing with weights w_i = T_i * alpha_i. Color and semantic
logits are composited with the same weights; semantic probabilities come
from a softmax applied after compositing.

Rays with low accumulated opacity composite against a fixed background
color and a fixed background logit vector, which keeps both losses
well-posed in empty space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .camera import CameraPose, Intrinsics, Ray, ray_grid
from .scene import AnalyticScene
from .semantics import ALBEDO, BACKGROUND_COLOR, NUM_CLASSES, SemanticClass

EPS_HIT = 1e-4          # sphere-trace surface tolerance, meters
MAX_STEPS = 256
T_MAX_FACTOR = 4.0      # give up beyond this many bounding radii
EPS_DEN = 1e-12         # opacity denominator guard
BG_LOGIT_SCALE = 10.0   # background logit magnitude for empty space

LIGHT_DIR = np.array([0.45, 0.25, 0.86])
LIGHT_DIR = LIGHT_DIR / np.linalg.norm(LIGHT_DIR)
AMBIENT = 0.42
DIFFUSE = 0.58


@dataclass(frozen=True)
class RenderConfig:
    n_samples: int = 64
    bg_color: np.ndarray = None  # type: ignore[assignment]
    bg_logit_scale: float = BG_LOGIT_SCALE

    def __post_init__(self):
        if self.bg_color is None:
            object.__setattr__(self, "bg_color", BACKGROUND_COLOR.copy())


@dataclass
class MultiModalImage:
    rgb: np.ndarray        # (H, W, 3) float64 in [0, 1]
    label: np.ndarray      # (H, W) uint8 label ids (ground truth renders)
    depth: np.ndarray      # (H, W) float64, +inf where nothing was hit
    validity: np.ndarray   # (H, W) bool
    probabilities: np.ndarray | None = None  # (H, W, L), volume renders only


@dataclass(frozen=True)
class RaySamples:
    ray: Ray
    t: np.ndarray          # strictly increasing, all > 0
    positions: np.ndarray  # (n, 3)

    def __post_init__(self):
        if self.t.ndim != 1 or self.t.size < 2:
            raise ValueError("need at least two samples")
        if not (np.all(np.diff(self.t) > 0) and self.t[0] > 0):
            raise ValueError("sample distances must be strictly increasing and positive")


class AnalyticField:
    """Field view of an analytic scene: exact SDF, flat shaded color,
    one-hot semantic logits. ``inv_std`` mimics a trained sharpness."""

    def __init__(self, scene: AnalyticScene, inv_std: float = 200.0,
                 label_band: float | None = None):
        self.scene = scene
        self._inv_std = float(inv_std)
        self.label_band = label_band if label_band is not None else 4.0 * EPS_HIT
        self.num_classes = NUM_CLASSES
        self.bound_center = scene.bound_center
        self.bound_radius = scene.bound_radius
        self._grad_h = max(1e-5, 1e-5 * scene.bound_radius)

    def inv_std(self) -> float:
        return self._inv_std

    def sdf(self, x: np.ndarray) -> np.ndarray:
        return self.scene.sdf(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        g = np.empty_like(x)
        h = self._grad_h
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = h
            g[:, axis] = (self.scene.sdf(x + e) - self.scene.sdf(x - e)) / (2.0 * h)
        return g

    def semantic_logits(self, x: np.ndarray) -> np.ndarray:
        labels = self.scene.label(x, self.label_band)
        return BG_LOGIT_SCALE * np.eye(NUM_CLASSES)[labels]

    def evaluate(self, x: np.ndarray, v: np.ndarray):
        """SDF, shaded color, and logits at points ``x`` viewed along ``v``."""
        f = self.sdf(x)
        normals = self.gradient(x)
        labels = self.scene.label(x, self.label_band)
        color = shade(labels, normals)
        logits = BG_LOGIT_SCALE * np.eye(NUM_CLASSES)[labels]
        return f, color, logits


def shade(labels: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Flat albedo with a fixed-direction Lambert term."""
    n = normals / np.maximum(np.linalg.norm(normals, axis=-1, keepdims=True), 1e-12)
    lam = AMBIENT + DIFFUSE * np.maximum(n @ LIGHT_DIR, 0.0)
    color = ALBEDO[labels] * lam[..., None]
    return np.clip(color, 0.0, 1.0)


def ray_sphere_span(origins: np.ndarray, dirs: np.ndarray, center: np.ndarray,
                    radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entry/exit distances of rays against a sphere; miss mask where none."""
    oc = origins - center
    b = np.sum(oc * dirs, axis=-1)
    c = np.sum(oc * oc, axis=-1) - radius * radius
    disc = b * b - c
    hit = disc > 0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    hit &= t1 > 0
    return np.maximum(t0, 0.0), t1, hit


def sphere_trace(scene: AnalyticScene, origins: np.ndarray, dirs: np.ndarray,
                 label_band: float | None = None):
    """Vectorized sphere tracing. Returns (hit, t, label) per ray."""
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    n = dirs.shape[0]
    if origins.shape[0] == 1:
        origins = np.broadcast_to(origins, dirs.shape)
    t_enter, t_exit, may_hit = ray_sphere_span(origins, dirs, scene.bound_center,
                                               scene.bound_radius)
    t_cap = t_enter + T_MAX_FACTOR * scene.bound_radius

    t = t_enter.copy()
    hit = np.zeros(n, dtype=bool)
    active = may_hit.copy()
    for _ in range(MAX_STEPS):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        p = origins[idx] + t[idx, None] * dirs[idx]
        d = scene.sdf(p)
        newly_hit = d < EPS_HIT
        hit[idx[newly_hit]] = True
        t[idx] += d
        out = (t[idx] > np.minimum(t_exit[idx] + EPS_HIT, t_cap[idx])) | newly_hit
        active[idx[out]] = False

    labels = np.full(n, int(SemanticClass.BACKGROUND), dtype=np.uint8)
    if np.any(hit):
        band = label_band if label_band is not None else 4.0 * EPS_HIT
        pts = origins[hit] + t[hit, None] * dirs[hit]
        labels[hit] = scene.label(pts, band)
    t = np.where(hit, t, np.inf)
    return hit, t, labels


def render_ground_truth(scene: AnalyticScene, pose: CameraPose,
                        intr: Intrinsics) -> MultiModalImage:
    """Exact per-pixel color/label/depth via sphere tracing at pixel centers."""
    origin, dirs = ray_grid(pose, intr)
    flat_dirs = dirs.reshape(-1, 3)
    hit, t, labels = sphere_trace(scene, origin[None, :], flat_dirs)

    rgb = np.tile(BACKGROUND_COLOR, (flat_dirs.shape[0], 1))
    if np.any(hit):
        pts = origin[None, :] + t[hit, None] * flat_dirs[hit]
        field = AnalyticField(scene)
        normals = field.gradient(pts)
        rgb[hit] = shade(labels[hit], normals)
    h, w = intr.height, intr.width
    return MultiModalImage(
        rgb=rgb.reshape(h, w, 3),
        label=labels.reshape(h, w),
        depth=t.reshape(h, w),
        validity=hit.reshape(h, w),
    )


def render_facade_ids(scene: AnalyticScene, pose: CameraPose,
                      intr: Intrinsics) -> np.ndarray:
    """Facade id per pixel (int32), -1 where no facade patch owns the hit."""
    origin, dirs = ray_grid(pose, intr)
    flat_dirs = dirs.reshape(-1, 3)
    hit, t, _ = sphere_trace(scene, origin[None, :], flat_dirs)
    ids = np.full(flat_dirs.shape[0], -1, dtype=np.int32)
    if np.any(hit):
        pts = origin[None, :] + t[hit, None] * flat_dirs[hit]
        ids[hit] = scene.facade_id_at(pts, 4.0 * EPS_HIT)
    return ids.reshape(intr.height, intr.width)


def render_semantic_mask(scene: AnalyticScene, pose: CameraPose,
                         intr: Intrinsics) -> np.ndarray:
    """Boolean building mask used by the pose-validity check."""
    origin, dirs = ray_grid(pose, intr)
    hit, _, _ = sphere_trace(scene, origin[None, :], dirs.reshape(-1, 3))
    return hit.reshape(intr.height, intr.width)


def stratified_samples(ray: Ray, near: float, far: float, n: int,
                       uniforms: np.ndarray | None = None,
                       rng: np.random.Generator | None = None) -> RaySamples:
    """One uniform draw per stratum of [near, far]."""
    if not (0 < near < far):
        raise ValueError("need 0 < near < far")
    if uniforms is None:
        uniforms = (rng.random(n) if rng is not None else np.full(n, 0.5))
    t = near + (np.arange(n) + uniforms) * (far - near) / n
    return RaySamples(ray=ray, t=t, positions=ray.origin[None, :] + t[:, None] * ray.direction)


def neus_alpha(f: np.ndarray, f_next: np.ndarray, s: float) -> np.ndarray:
    """Opacity from the sigmoid-CDF drop between consecutive SDF samples."""
    if s <= 0:
        raise ValueError("inverse standard deviation must be positive")
    phi = _sigmoid(s * np.asarray(f))
    phi_next = _sigmoid(s * np.asarray(f_next))
    return np.maximum((phi - phi_next) / np.maximum(phi, EPS_DEN), 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def composite(values: np.ndarray, alphas: np.ndarray):
    """Front-to-back compositing.

    values: (..., n, K); alphas: (..., n). Returns (out (..., K),
    weights (..., n), accumulation (...,)).
    """
    trans = np.cumprod(1.0 - alphas, axis=-1)
    t_prev = np.concatenate([np.ones_like(trans[..., :1]), trans[..., :-1]], axis=-1)
    weights = t_prev * alphas
    out = np.sum(weights[..., None] * values, axis=-2)
    return out, weights, np.sum(weights, axis=-1)


def bg_logits(num_classes: int, scale: float = BG_LOGIT_SCALE) -> np.ndarray:
    out = np.zeros(num_classes)
    out[int(SemanticClass.BACKGROUND)] = scale
    return out


def render_rays(field, origins: np.ndarray, dirs: np.ndarray,
                config: RenderConfig, uniforms: np.ndarray):
    """Volume-render a batch of rays against any field.

    Returns dict with color (B,3), logits (B,L), depth (B,), acc (B,).
    Rays missing the bounding sphere composite pure background.
    """
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    b = dirs.shape[0]
    if origins.shape[0] == 1:
        origins = np.broadcast_to(origins, dirs.shape)
    n = config.n_samples
    near, far, inside = ray_sphere_span(origins, dirs, field.bound_center,
                                        field.bound_radius)
    near = np.maximum(near, 1e-6)
    inside &= far > near

    color = np.tile(config.bg_color, (b, 1))
    logits = np.tile(bg_logits(field.num_classes, config.bg_logit_scale), (b, 1))
    depth = np.zeros(b)
    acc = np.zeros(b)
    if np.any(inside):
        idx = np.flatnonzero(inside)
        t = near[idx, None] + (np.arange(n)[None, :] + uniforms[idx]) \
            * ((far[idx] - near[idx]) / n)[:, None]
        pts = origins[idx, None, :] + t[..., None] * dirs[idx, None, :]
        view = np.broadcast_to(dirs[idx, None, :], pts.shape)
        f, c, s_logits = field.evaluate(pts.reshape(-1, 3), view.reshape(-1, 3))
        f = f.reshape(len(idx), n)
        c = c.reshape(len(idx), n, 3)
        s_logits = s_logits.reshape(len(idx), n, -1)
        alphas = neus_alpha(f[:, :-1], f[:, 1:], field.inv_std())
        packed = np.concatenate([c[:, :-1], s_logits[:, :-1], t[:, :-1, None]], axis=2)
        out, weights, a = composite(packed, alphas)
        l_count = s_logits.shape[2]
        color[idx] = out[:, :3] + (1.0 - a)[:, None] * config.bg_color
        logits[idx] = out[:, 3:3 + l_count] \
            + (1.0 - a)[:, None] * bg_logits(l_count, config.bg_logit_scale)
        depth[idx] = out[:, 3 + l_count]
        acc[idx] = a
    return {"color": color, "logits": logits, "depth": depth, "acc": acc}


def render_ray(field, ray: Ray, config: RenderConfig,
               uniform: float | np.ndarray = 0.5):
    """Single-ray convenience wrapper around :func:`render_rays`."""
    u = np.atleast_1d(np.asarray(uniform, dtype=float)).reshape(1, -1)
    if u.shape[1] == 1:
        u = np.full((1, 1), float(u[0, 0]))
    out = render_rays(field, ray.origin[None, :], ray.direction[None, :], config, u)
    return {k: v[0] for k, v in out.items()}


def render_image(field, pose: CameraPose, intr: Intrinsics, config: RenderConfig,
                 seed: int = 0, image_id: int = 0, chunk: int = 8192) -> MultiModalImage:
    """Volume-render a full image; per-pixel jitter comes from a stream keyed
    by (seed, image id), so chunking never changes the result."""
    origin, dirs = ray_grid(pose, intr)
    flat = dirs.reshape(-1, 3)
    n_px = flat.shape[0]
    uniforms = _rng.stream(seed, 23, image_id).random((n_px, config.n_samples))
    color = np.empty((n_px, 3))
    probs = np.empty((n_px, field.num_classes))
    depth = np.empty(n_px)
    acc = np.empty(n_px)
    for lo in range(0, n_px, chunk):
        sl = slice(lo, min(lo + chunk, n_px))
        out = render_rays(field, origin[None, :], flat[sl], config, uniforms[sl])
        color[sl] = out["color"]
        probs[sl] = _softmax(out["logits"])
        depth[sl] = out["depth"]
        acc[sl] = out["acc"]
    h, w = intr.height, intr.width
    labels = np.argmax(probs, axis=1).astype(np.uint8)
    return MultiModalImage(
        rgb=np.clip(color, 0.0, 1.0).reshape(h, w, 3),
        label=labels.reshape(h, w),
        depth=np.where(acc > 0.5, depth / np.maximum(acc, 1e-12), np.inf).reshape(h, w),
        validity=(acc > 0.5).reshape(h, w),
        probabilities=probs.reshape(h, w, -1),
    )


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)
