"""Training loop: batched rays, fused loss/gradient, ADAM, LR schedule.

Training is a pure function of (dataset bytes, config, seed): batches and
sample jitter are drawn from counter-based streams keyed by (seed, step),
never from mutable generator state, so runs replay bitwise and resuming
from a checkpoint continues the exact same trajectory.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng as _rng
from .batchgrad import ray_batch_loss_and_grad
from .camera import CameraPose, Intrinsics
from .errors import Bn3dError, NonFiniteError
from .field_net import FieldConfig, FieldNetwork, save_checkpoint, sdf_init_sphere
from .losses import LossBreakdown, lr_at
from .optim import AdamState, adam_step
from .semantics import BACKGROUND_COLOR


@dataclass(frozen=True)
class TrainConfig:
    name: str = "desk"
    batch_rays: int = 512
    iterations: int = 2500
    warmup: int = 250
    lr_peak: float = 5e-4
    lr_floor: float = 2.5e-5
    lambda1: float = 0.1
    lambda2: float = 0.5
    n_samples: int = 24
    eval_cadence: int = 500
    seed: int = 0
    init_steps: int = 500
    bg_logit_scale: float = 10.0
    field: FieldConfig = field(default_factory=FieldConfig)

    def __post_init__(self):
        if not (0 < self.warmup < self.iterations):
            raise Bn3dError("warmup must lie strictly inside (0, iterations)")
        if not (0 < self.lr_floor < self.lr_peak):
            raise Bn3dError("need 0 < floor lr < peak lr")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        fc = d.pop("field", {})
        return TrainConfig(field=FieldConfig(**fc), **d)


def load_profile(name_or_path) -> TrainConfig:
    """Load a named profile shipped with the package, or a JSON file path."""
    text = None
    try:
        res = importlib.resources.files("bn3d").joinpath(f"profiles/{name_or_path}.json")
        if res.is_file():
            text = res.read_text()
    except (TypeError, ValueError):
        pass
    if text is None:
        with open(name_or_path, "r", encoding="utf-8") as f:
            text = f.read()
    return TrainConfig.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrainView:
    pose: CameraPose
    intrinsics: Intrinsics
    rgb: np.ndarray    # (H, W, 3) float64, already quantized like the files
    label: np.ndarray  # (H, W) uint8


@dataclass
class RayBatch:
    origins: np.ndarray
    dirs: np.ndarray
    target_rgb: np.ndarray
    target_label: np.ndarray


def sample_ray_batch(views: list[TrainView], batch_rays: int, seed: int,
                     step: int) -> RayBatch:
    """Uniform over every pixel of every view; a pure function of (seed, step)."""
    h = views[0].intrinsics.height
    w = views[0].intrinsics.width
    per_view = h * w
    gen = _rng.stream(seed, 40, step)
    flat = gen.integers(0, per_view * len(views), size=batch_rays)
    view_idx = flat // per_view
    pix = flat % per_view
    rows = pix // w
    cols = pix % w

    origins = np.empty((batch_rays, 3))
    dirs = np.empty((batch_rays, 3))
    target_rgb = np.empty((batch_rays, 3))
    target_label = np.empty(batch_rays, dtype=np.int64)
    for vi in np.unique(view_idx):
        sel = view_idx == vi
        view = views[vi]
        intr = view.intrinsics
        u = (cols[sel] + 0.5 - intr.cx) / intr.focal
        v = (rows[sel] + 0.5 - intr.cy) / intr.focal
        d_cam = np.stack([u, v, np.ones_like(u)], axis=1)
        d = d_cam @ view.pose.rotation.T
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        origins[sel] = view.pose.position
        dirs[sel] = d
        target_rgb[sel] = view.rgb[rows[sel], cols[sel]]
        target_label[sel] = view.label[rows[sel], cols[sel]]
    return RayBatch(origins, dirs, target_rgb, target_label)


@dataclass
class TrainResult:
    net: FieldNetwork
    metrics: list[dict]
    final_step: int
    diverged: bool = False


def train(views: list[TrainView], config: TrainConfig, bound_center: np.ndarray,
          bound_radius: float, metrics_path=None, checkpoint_path=None,
          resume_from=None, log=print) -> TrainResult:
    """Optimize a field network against the dataset views.

    ``resume_from`` may be (net, adam_m, adam_v, adam_t, step) to continue a
    run; otherwise the network is freshly initialized and pre-trained to a
    sphere. On divergence the last finite checkpoint is kept and the result
    flagged.
    """
    if len(views) < 2:
        raise Bn3dError("training needs at least two views")

    if resume_from is not None:
        net, adam, start_step = resume_from
    else:
        net = FieldNetwork(config.field, bound_center, bound_radius, seed=config.seed)
        sdf_init_sphere(net, steps=config.init_steps, seed=config.seed)
        adam = AdamState.for_size(net.param_count())
        start_step = 0

    params = net.flatten()
    last_good = params.copy()
    metrics: list[dict] = []
    writer = None
    csv_file = None
    if metrics_path is not None:
        csv_file = open(metrics_path, "a" if start_step else "w", newline="")
        writer = csv.writer(csv_file)
        if start_step == 0:
            writer.writerow(["step", "lr", "color", "eikonal", "semantic", "total", "seconds"])

    t_start = time.time()
    diverged = False
    step = start_step
    try:
        for step in range(start_step, config.iterations):
            batch = sample_ray_batch(views, config.batch_rays, config.seed, step)
            uniforms = _rng.stream(config.seed, 41, step).random(
                (config.batch_rays, config.n_samples))
            try:
                breakdown, grad = ray_batch_loss_and_grad(
                    net, batch.origins, batch.dirs, batch.target_rgb,
                    batch.target_label, uniforms, config.n_samples,
                    config.lambda1, config.lambda2, BACKGROUND_COLOR,
                    config.bg_logit_scale)
            except NonFiniteError:
                diverged = True
                break
            if not np.isfinite(breakdown.total):
                diverged = True
                break
            lr = lr_at(step, config.warmup, config.iterations, config.lr_peak,
                       config.lr_floor)
            adam_step(params, grad, adam, lr)
            net.load_flat(params)
            last_good = params

            row = {"step": step, "lr": lr, "color": breakdown.color,
                   "eikonal": breakdown.eikonal, "semantic": breakdown.semantic,
                   "total": breakdown.total, "seconds": time.time() - t_start}
            metrics.append(row)
            if writer is not None:
                writer.writerow([row[k] for k in
                                 ("step", "lr", "color", "eikonal", "semantic",
                                  "total", "seconds")])
            if (step + 1) % config.eval_cadence == 0 or step == config.iterations - 1:
                if checkpoint_path is not None:
                    save_checkpoint(checkpoint_path, net, step + 1,
                                    adam_m=adam.m, adam_v=adam.v, adam_t=adam.t)
                if log is not None:
                    per_ray = breakdown.color / config.batch_rays
                    log(f"step {step + 1}/{config.iterations} lr {lr:.2e} "
                        f"color/ray {per_ray:.4f} total {breakdown.total:.2f} "
                        f"s {net.inv_std():.1f}")
    finally:
        if csv_file is not None:
            csv_file.close()

    if diverged:
        net.load_flat(last_good)
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, net, step, adam_m=adam.m,
                            adam_v=adam.v, adam_t=adam.t)
        if log is not None:
            log(f"diverged at step {step}; kept last finite parameters")
    elif checkpoint_path is not None:
        save_checkpoint(checkpoint_path, net, config.iterations,
                        adam_m=adam.m, adam_v=adam.v, adam_t=adam.t)
    return TrainResult(net=net, metrics=metrics,
                       final_step=step if diverged else config.iterations,
                       diverged=diverged)
