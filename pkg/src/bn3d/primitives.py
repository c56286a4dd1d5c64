"""Exact signed-distance primitives and labeled surface patches.

Solids define the building volume (their min-union is the scene SDF);
patches are 2D regions embedded in 3D that carry semantic labels. Patch
distances are exact for flat patches and chart-exact for cylindrical ones,
which is all the nearest-patch labeling rule needs: labels are only ever
queried within a band of the surface.

All evaluators take ``(N, 3)`` or ``(N, 2)`` float64 arrays and are
vectorized; large inputs are chunked internally to bound peak memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .semantics import SemanticClass

_CHUNK_ELEMS = 4_000_000  # max points x edges per polygon-distance block


def _hypot2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(a * a + b * b)


def polygon_sdf(p2: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Exact signed distance to a simple polygon (negative inside).

    Sign comes from even-odd ray crossing, so vertex order does not matter;
    the distance is the true minimum over all edges.
    """
    p2 = np.atleast_2d(p2)
    n = p2.shape[0]
    k = verts.shape[0]
    out = np.empty(n)
    step = max(1, _CHUNK_ELEMS // max(k, 1))
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    ee = np.maximum(np.sum(e * e, axis=1), 1e-300)
    for lo in range(0, n, step):
        q = p2[lo : lo + step]
        w = q[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("nkd,kd->nk", w, e) / ee[None, :], 0.0, 1.0)
        diff = w - t[:, :, None] * e[None, :, :]
        dist = np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))
        # even-odd crossings against a +x ray
        ay, by = a[:, 1], b[:, 1]
        straddle = (ay > q[:, 1, None]) != (by > q[:, 1, None])
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (q[:, 1, None] - ay) * e[:, 0] / np.where(e[:, 1] == 0, 1.0, e[:, 1])
        crossings = np.sum(straddle & (q[:, 0, None] < xint), axis=1)
        inside = crossings % 2 == 1
        out[lo : lo + step] = np.where(inside, -dist, dist)
    return out


def rect_sdf_2d(pu: np.ndarray, pv: np.ndarray, u0: float, v0: float, u1: float, v1: float) -> np.ndarray:
    """Exact signed distance to an axis-aligned rectangle in patch coordinates."""
    qx = np.abs(pu - 0.5 * (u0 + u1)) - 0.5 * (u1 - u0)
    qy = np.abs(pv - 0.5 * (v0 + v1)) - 0.5 * (v1 - v0)
    outside = _hypot2(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside


def region_distance(pu: np.ndarray, pv: np.ndarray, u0: float, v0: float, u1: float, v1: float,
                    holes: tuple[tuple[float, float, float, float], ...]) -> np.ndarray:
    """Distance to a rectangle minus rectangular holes (0 on the region).

    Holes must be disjoint and strictly inside the rectangle, which the
    building generator guarantees.
    """
    base = rect_sdf_2d(pu, pv, u0, v0, u1, v1)
    d = np.maximum(base, 0.0)
    if holes:
        inside_rect = base < 0.0
        for hu0, hv0, hu1, hv1 in holes:
            h = rect_sdf_2d(pu, pv, hu0, hv0, hu1, hv1)
            in_hole = (h < 0.0) & inside_rect
            d = np.where(in_hole, -h, d)
    return d


def _extrude(d2: np.ndarray, z: np.ndarray, z0: float, z1: float) -> np.ndarray:
    dz = np.abs(z - 0.5 * (z0 + z1)) - 0.5 * (z1 - z0)
    outside = _hypot2(np.maximum(d2, 0.0), np.maximum(dz, 0.0))
    inside = np.minimum(np.maximum(d2, dz), 0.0)
    return outside + inside


@dataclass(frozen=True)
class Footprint2D:
    """Ground-plane region: union of simple polygons and discs."""

    polygons: tuple[np.ndarray, ...]
    discs: tuple[tuple[float, float, float], ...] = ()

    def sdf(self, p2: np.ndarray) -> np.ndarray:
        d = np.full(p2.shape[0], np.inf)
        for poly in self.polygons:
            d = np.minimum(d, polygon_sdf(p2, poly))
        for cx, cy, r in self.discs:
            dd = np.hypot(p2[:, 0] - cx, p2[:, 1] - cy) - r
            d = np.minimum(d, dd)
        return d


@dataclass(frozen=True)
class PrismSolid:
    """Footprint extruded between two heights."""

    footprint: Footprint2D
    z0: float
    z1: float

    def sdf(self, p: np.ndarray) -> np.ndarray:
        return _extrude(self.footprint.sdf(p[:, :2]), p[:, 2], self.z0, self.z1)


@dataclass(frozen=True)
class BoxSolid:
    center: np.ndarray
    half: np.ndarray

    def sdf(self, p: np.ndarray) -> np.ndarray:
        q = np.abs(p - self.center) - self.half
        outside = np.sqrt(np.sum(np.maximum(q, 0.0) ** 2, axis=1))
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class RectPatch:
    """Planar rectangle with optional rectangular holes, in a (u, v) frame."""

    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    u_len: float
    v_len: float
    cls: SemanticClass
    holes: tuple[tuple[float, float, float, float], ...] = ()
    normal: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "normal", np.cross(self.u_axis, self.v_axis))

    def distance(self, p: np.ndarray) -> np.ndarray:
        rel = p - self.origin
        pu = rel @ self.u_axis
        pv = rel @ self.v_axis
        pw = rel @ self.normal
        d2 = region_distance(pu, pv, 0.0, 0.0, self.u_len, self.v_len, self.holes)
        return _hypot2(pw, d2)


@dataclass(frozen=True)
class PolyPatch:
    """Horizontal planar region (roof top, building underside) at height z."""

    footprint: Footprint2D
    z: float
    cls: SemanticClass

    def distance(self, p: np.ndarray) -> np.ndarray:
        d2 = np.maximum(self.footprint.sdf(p[:, :2]), 0.0)
        return _hypot2(p[:, 2] - self.z, d2)


@dataclass(frozen=True)
class CylinderBandPatch:
    """Vertical cylinder-surface segment, holes given in (arc-length, z) chart.

    The chart metric (radial offset, arc length, z) is exact for points near
    the surface, which is the only place labels are queried.
    """

    center: tuple[float, float]
    radius: float
    theta_mid: float
    theta_half: float
    z0: float
    z1: float
    cls: SemanticClass
    holes: tuple[tuple[float, float, float, float], ...] = ()

    def distance(self, p: np.ndarray) -> np.ndarray:
        dx = p[:, 0] - self.center[0]
        dy = p[:, 1] - self.center[1]
        rho = np.hypot(dx, dy)
        theta = np.arctan2(dy, dx)
        dtheta = np.mod(theta - self.theta_mid + np.pi, 2.0 * np.pi) - np.pi
        s = self.radius * dtheta
        smax = self.radius * self.theta_half
        d2 = region_distance(s, p[:, 2], -smax, self.z0, smax, self.z1, self.holes)
        return _hypot2(rho - self.radius, d2)


Patch = RectPatch | PolyPatch | CylinderBandPatch
Solid = PrismSolid | BoxSolid
