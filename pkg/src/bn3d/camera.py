"""Pinhole camera model, look-at poses, and iterative valid-pose sampling.

Conventions: world is z-up; camera space is x-right, y-down, z-forward, so
the world-from-camera rotation has columns (right, down, forward). Depth is
distance along the ray, not z-depth, and the ground-truth renderer emits
the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import Bn3dError, PoseSamplingError
from .semantics import SemanticClass


@dataclass(frozen=True)
class Intrinsics:
    width: int
    height: int
    focal: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.focal <= 0:
            raise Bn3dError("focal length must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise Bn3dError("principal point must lie inside the image")

    @staticmethod
    def square(size: int, fov_deg: float = 55.0) -> "Intrinsics":
        focal = 0.5 * size / np.tan(np.radians(0.5 * fov_deg))
        return Intrinsics(size, size, focal, 0.5 * size, 0.5 * size)

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "focal": self.focal,
                "cx": self.cx, "cy": self.cy}

    @staticmethod
    def from_dict(d: dict) -> "Intrinsics":
        return Intrinsics(int(d["width"]), int(d["height"]), float(d["focal"]),
                          float(d["cx"]), float(d["cy"]))


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray
    rotation: np.ndarray  # 3x3 world-from-camera, columns (right, down, forward)

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[:, 2]

    def __post_init__(self):
        r = self.rotation
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise Bn3dError("rotation must be orthonormal")
        if np.linalg.det(r) < 0:
            raise Bn3dError("rotation must be proper (det +1)")


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise Bn3dError("ray direction must be unit length")


def look_at(poi: np.ndarray, position: np.ndarray, up_hint=(0.0, 0.0, 1.0)) -> CameraPose:
    """Pose at ``position`` with the forward axis pointing at ``poi``."""
    poi = np.asarray(poi, dtype=float)
    position = np.asarray(position, dtype=float)
    up = np.asarray(up_hint, dtype=float)
    delta = poi - position
    dist = np.linalg.norm(delta)
    if dist < 1e-12:
        raise Bn3dError("camera position coincides with the point of interest")
    forward = delta / dist
    right = np.cross(forward, up)
    right_norm = np.linalg.norm(right)
    if right_norm < 1e-9:
        raise Bn3dError("viewing direction is parallel to the up hint")
    right = right / right_norm
    down = np.cross(forward, right)
    return CameraPose(position=position, rotation=np.stack([right, down, forward], axis=1))


def pixel_ray(pose: CameraPose, intr: Intrinsics, u: float, v: float) -> Ray:
    """Ray through pixel (u, v); offsets like u+0.5 address pixel centers."""
    if not (0 <= u <= intr.width and 0 <= v <= intr.height):
        raise Bn3dError(f"pixel ({u}, {v}) outside image bounds")
    d = np.array([(u - intr.cx) / intr.focal, (v - intr.cy) / intr.focal, 1.0])
    d_world = pose.rotation @ d
    return Ray(origin=pose.position.copy(), direction=d_world / np.linalg.norm(d_world))


def ray_grid(pose: CameraPose, intr: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Origins (3,) broadcastable and unit directions (H, W, 3) for all pixel centers."""
    u = (np.arange(intr.width) + 0.5 - intr.cx) / intr.focal
    v = (np.arange(intr.height) + 0.5 - intr.cy) / intr.focal
    uu, vv = np.meshgrid(u, v)
    d = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    d_world = d @ pose.rotation.T
    d_world /= np.linalg.norm(d_world, axis=-1, keepdims=True)
    return pose.position.copy(), d_world


def project(pose: CameraPose, intr: Intrinsics, points: np.ndarray) -> np.ndarray:
    """World points (N, 3) to pixel coordinates (N, 2); points must be in front."""
    rel = (np.atleast_2d(points) - pose.position) @ pose.rotation
    z = rel[:, 2]
    if np.any(z <= 0):
        raise Bn3dError("cannot project points behind the camera")
    return np.stack([intr.focal * rel[:, 0] / z + intr.cx,
                     intr.focal * rel[:, 1] / z + intr.cy], axis=1)


def _spherical_position(poi: np.ndarray, r: float, theta: float, phi: float) -> np.ndarray:
    return poi + r * np.array([
        np.cos(phi) * np.cos(theta),
        np.cos(phi) * np.sin(theta),
        np.sin(phi),
    ])


# pose validity: no building pixel on the outer border, and the building
# fills a reasonable share of the frame
_BORDER_PX = 2
_MIN_FILL = 0.20
_PHI_RANGE = (np.radians(5.0), np.radians(75.0))
_GROW = 1.15
_SHRINK = 0.90
_RESAMPLE_AFTER = 5
_CHECK_SIZE = 64  # validation renders are cheap and low-res


def _pose_valid(scene, pose: CameraPose, intr: Intrinsics) -> tuple[bool, str]:
    from .render import render_semantic_mask  # local import to avoid a cycle

    building = render_semantic_mask(scene, pose, intr)
    border = np.zeros_like(building)
    border[:_BORDER_PX, :] = True
    border[-_BORDER_PX:, :] = True
    border[:, :_BORDER_PX] = True
    border[:, -_BORDER_PX:] = True
    if np.any(building & border):
        return False, "building touches image border"
    if np.count_nonzero(building) < _MIN_FILL * building.size:
        return False, "building fills too little of the frame"
    return True, ""


def sample_poses(scene, n: int, radius: float, seed: int,
                 image_size: int = _CHECK_SIZE) -> list[CameraPose]:
    """Sample ``n`` accepted poses on a sphere around the scene.

    Candidates are drawn in spherical coordinates, validated against a
    low-res rendered view, the radius is nudged on failure, and accepted
    poses must stay angularly separated from previous ones. Deterministic
    for a fixed (scene, n, radius, seed).
    """
    if n < 1:
        raise Bn3dError("need n >= 1 poses")
    if radius <= scene.bound_radius:
        raise Bn3dError("sampling radius must exceed the scene bounding radius")
    poi = scene.bound_center.copy()
    intr = Intrinsics.square(image_size)
    gen = _rng.stream(seed, 101)
    theta_min = 0.7 * np.sqrt(np.pi / n)  # ~mean separation of n uniform sphere points
    max_iters = 200 * n

    accepted: list[CameraPose] = []
    directions: list[np.ndarray] = []
    r = radius
    failures = 0
    last_reason = "no candidates tried"
    for _ in range(max_iters):
        theta = gen.uniform(0.0, 2.0 * np.pi)
        phi = gen.uniform(*_PHI_RANGE)
        pos = _spherical_position(poi, r, theta, phi)
        pose = look_at(poi, pos)
        ok, reason = _pose_valid(scene, pose, intr)
        if not ok:
            last_reason = reason
            failures += 1
            if reason == "building touches image border":
                r *= _GROW
            else:
                r = max(r * _SHRINK, scene.bound_radius * 1.05)
            if failures >= _RESAMPLE_AFTER:
                failures = 0
                r = radius
            continue
        d = (pos - poi) / np.linalg.norm(pos - poi)
        if directions:
            sep = np.arccos(np.clip(np.stack(directions) @ d, -1.0, 1.0))
            if np.min(sep) < theta_min:
                last_reason = "candidate too close to an accepted pose"
                continue
        accepted.append(pose)
        directions.append(d)
        failures = 0
        r = radius
        if len(accepted) == n:
            return accepted
    raise PoseSamplingError(
        f"found {len(accepted)}/{n} poses in {max_iters} iterations; last failure: {last_reason}",
        failing_constraint=last_reason,
    )
