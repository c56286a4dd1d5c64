"""Image-space WWR estimation baselines.

Two methods on facade-tagged views: naive per-facade pixel counting
averaged across facades, and the depth-scaled variant that reprojects
facade corners to 3D, rectifies each facade to a front-facing view by
homography, and aggregates per-facade ratios weighted by the facade
length-to-height ratio. Both count pixels only inside the view's facade
mask, which stands in for the single-facade framing the methods assume.

Neither method supports curved facades; callers must refuse those
buildings before invoking the aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .camera import CameraPose, Intrinsics, pixel_ray
from .errors import Bn3dError, GeometryError, UnsupportedGeometryError
from .semantics import SemanticClass


@dataclass
class FacadeView:
    facade_id: int
    label: np.ndarray        # (H, W) uint8 semantic ids
    depth: np.ndarray        # (H, W) float, +inf where invalid
    facade_mask: np.ndarray  # (H, W) bool: pixels belonging to this facade
    pose: CameraPose
    intrinsics: Intrinsics
    flags: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class FacadeMeasurement:
    facade_id: int
    length: float
    height: float
    alpha: float
    wwr: float
    n_views: int
    flags: tuple[str, ...] = ()


def facade_wwr_pixels(label: np.ndarray, mask: np.ndarray) -> float:
    """Window/wall pixel-count ratio within a facade mask."""
    win = int(np.count_nonzero((label == int(SemanticClass.WINDOW)) & mask))
    wall = int(np.count_nonzero((label == int(SemanticClass.WALL)) & mask))
    if wall == 0:
        raise GeometryError("facade mask contains no wall pixels")
    return win / wall


def wwr_2ds(views_by_facade: dict[int, list[FacadeView]]) -> float:
    """Unweighted mean of per-facade ratios (each averaged over its views)."""
    if not views_by_facade:
        raise Bn3dError("no facades provided")
    per_facade = []
    for fid in sorted(views_by_facade):
        views = views_by_facade[fid]
        if not views:
            raise Bn3dError(f"facade {fid} has no views")
        per_facade.append(float(np.mean(
            [facade_wwr_pixels(v.label, v.facade_mask) for v in views])))
    return float(np.mean(per_facade))


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull vertices."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and np.cross(out[-1] - out[-2], p - out[-2]) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _max_area_quad(hull: np.ndarray) -> np.ndarray:
    """Maximal-area quadrilateral with vertices on the convex hull.

    For every hull diagonal, the best quad is the diagonal plus the farthest
    hull point on each side; all diagonals are scanned (hull sizes here are
    tens of points).
    """
    h = hull.shape[0]
    if h == 3:
        return hull
    d = hull[None, :, :] - hull[:, None, :]
    rel = hull[None, None, :, :] - hull[:, None, None, :]
    cross = d[:, :, None, 0] * rel[..., 1] - d[:, :, None, 1] * rel[..., 0]
    pos = np.max(np.maximum(cross, 0.0), axis=2)
    neg = np.max(np.maximum(-cross, 0.0), axis=2)
    both = (pos > 0) & (neg > 0)
    if not np.any(both):
        i, j = np.unravel_index(np.argmax(pos + neg), pos.shape)
    else:
        score = np.where(both, pos + neg, -1.0)
        i, j = np.unravel_index(np.argmax(score), score.shape)
    k = int(np.argmax(cross[i, j]))
    l = int(np.argmax(-cross[i, j]))
    quad = hull[[i, k, j, l]]
    return quad


def _order_corners(quad: np.ndarray) -> np.ndarray:
    """Order as (TL, TR, BR, BL) in image coordinates (y down)."""
    center = quad.mean(axis=0)
    ang = np.arctan2(quad[:, 1] - center[1], quad[:, 0] - center[0])
    quad = quad[np.argsort(ang)]  # clockwise on screen (y down)
    start = int(np.argmin(quad.sum(axis=1)))
    return np.roll(quad, -start, axis=0)


def extract_facade_corners(mask: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Four ordered corner pixels (TL, TR, BR, BL) of the facade mask.

    If occlusion splits the mask, the largest connected component is used
    and the result flagged. Pixel coordinates address pixel centers.
    """
    flags: list[str] = []
    if np.count_nonzero(mask) < 16:
        raise GeometryError("facade mask too small for corner extraction")
    labeled, n = ndimage.label(mask)
    if n > 1:
        sizes = ndimage.sum_labels(np.ones_like(labeled), labeled, index=range(1, n + 1))
        keep = 1 + int(np.argmax(sizes))
        mask = labeled == keep
        flags.append("mask_split_largest_component")
    rows, cols = np.nonzero(mask)
    pts = np.stack([cols + 0.5, rows + 0.5], axis=1)
    hull = _convex_hull(pts)
    if hull.shape[0] < 3:
        raise GeometryError("facade mask is degenerate")
    quad = _max_area_quad(hull)
    return _order_corners(quad), flags


def reproject_corner(pixel: np.ndarray, depth: float, pose: CameraPose,
                     intr: Intrinsics) -> np.ndarray:
    """Pixel + along-ray depth to a world point."""
    if not np.isfinite(depth) or depth <= 0:
        raise GeometryError(f"invalid depth {depth} at corner {pixel}")
    ray = pixel_ray(pose, intr, float(pixel[0]), float(pixel[1]))
    return ray.origin + depth * ray.direction


def _corner_depths(view: FacadeView, corners: np.ndarray) -> np.ndarray:
    """Depth at each corner, read from the nearest facade pixel."""
    h, w = view.depth.shape
    out = np.empty(4)
    rows, cols = np.nonzero(view.facade_mask)
    for i, (u, v) in enumerate(corners):
        c = min(max(int(u), 0), w - 1)
        r = min(max(int(v), 0), h - 1)
        if view.facade_mask[r, c] and np.isfinite(view.depth[r, c]):
            out[i] = view.depth[r, c]
            continue
        d2 = (cols - c) ** 2 + (rows - r) ** 2
        j = int(np.argmin(d2))
        out[i] = view.depth[rows[j], cols[j]]
    return out


def measure_facade(view: FacadeView) -> tuple[np.ndarray, float, float]:
    """(corner pixels, length, height) of the facade seen in this view."""
    corners, flags = extract_facade_corners(view.facade_mask)
    view.flags.extend(flags)
    depths = _corner_depths(view, corners)
    world = np.stack([
        reproject_corner(corners[i], depths[i], view.pose, view.intrinsics)
        for i in range(4)
    ])
    tl, tr, br, bl = world
    length = 0.5 * (np.linalg.norm(tr - tl) + np.linalg.norm(br - bl))
    height = 0.5 * (np.linalg.norm(bl - tl) + np.linalg.norm(br - tr))
    if length <= 0 or height <= 0:
        raise GeometryError("degenerate facade extent")
    return corners, float(length), float(height)


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 homography mapping 4 source points to 4 destination points."""
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise Bn3dError("need exactly four 2D correspondences")
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        b[2 * i] = u
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i + 1] = v
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("degenerate quadrilateral, homography undefined") from exc
    return np.array([[sol[0], sol[1], sol[2]],
                     [sol[3], sol[4], sol[5]],
                     [sol[6], sol[7], 1.0]])


def rectify_facade(view: FacadeView, corners: np.ndarray, alpha: float,
                   out_height: int = 256) -> np.ndarray:
    """Warp the facade into a front-facing raster of aspect ratio alpha.

    Labels are resampled nearest-neighbor; pixels outside the facade mask
    map to BACKGROUND, so no label id can appear that the source lacked.
    """
    area2 = abs(np.cross(corners[2] - corners[0], corners[3] - corners[1]))
    if area2 <= 1e-9:
        raise GeometryError("degenerate quadrilateral, cannot rectify")
    w_out = max(8, int(round(alpha * out_height)))
    dst = np.array([[0.0, 0.0], [w_out, 0.0], [w_out, out_height], [0.0, out_height]])
    h_inv = homography_from_points(dst, corners)  # target -> source
    xs = np.arange(w_out) + 0.5
    ys = np.arange(out_height) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    ones = np.ones_like(gx)
    src = np.stack([gx, gy, ones], axis=-1) @ h_inv.T
    sx = src[..., 0] / src[..., 2]
    sy = src[..., 1] / src[..., 2]
    col = np.floor(sx).astype(int)
    row = np.floor(sy).astype(int)
    h_img, w_img = view.label.shape
    valid = (col >= 0) & (col < w_img) & (row >= 0) & (row < h_img)
    out = np.full((out_height, w_out), int(SemanticClass.BACKGROUND), dtype=np.uint8)
    vv = valid & view.facade_mask[np.clip(row, 0, h_img - 1), np.clip(col, 0, w_img - 1)]
    out[vv] = view.label[row[vv], col[vv]]
    return out


def measure_facades_2dss(views_by_facade: dict[int, list[FacadeView]],
                         out_height: int = 256) -> list[FacadeMeasurement]:
    """Per-facade rectified WWR and length-to-height ratio, views averaged."""
    results = []
    failures = []
    for fid in sorted(views_by_facade):
        views = views_by_facade[fid]
        if not views:
            failures.append(fid)
            continue
        alphas, ratios, lengths, heights, flags = [], [], [], [], []
        try:
            for view in views:
                corners, length, height = measure_facade(view)
                alpha = length / height
                rect = rectify_facade(view, corners, alpha, out_height)
                ratios.append(facade_wwr_pixels(rect, np.ones_like(rect, dtype=bool)))
                alphas.append(alpha)
                lengths.append(length)
                heights.append(height)
                flags.extend(view.flags)
        except (GeometryError, Bn3dError):
            failures.append(fid)
            continue
        results.append(FacadeMeasurement(
            facade_id=fid,
            length=float(np.mean(lengths)),
            height=float(np.mean(heights)),
            alpha=float(np.mean(alphas)),
            wwr=float(np.mean(ratios)),
            n_views=len(views),
            flags=tuple(sorted(set(flags))),
        ))
    if failures:
        raise GeometryError(f"facades {failures} could not be measured")
    return results


def wwr_2dss(views_by_facade: dict[int, list[FacadeView]],
             out_height: int = 256) -> tuple[float, list[FacadeMeasurement]]:
    """Aggregate facade ratios weighted by length-to-height ratio."""
    measurements = measure_facades_2dss(views_by_facade, out_height)
    alpha_sum = sum(m.alpha for m in measurements)
    if alpha_sum <= 0:
        raise GeometryError("facade aspect weights sum to zero")
    value = sum(m.wwr * m.alpha for m in measurements) / alpha_sum
    return float(value), measurements


def refuse_curved(facade_shapes: dict[int, str]) -> None:
    arcs = [fid for fid, shape in facade_shapes.items() if shape != "flat"]
    if arcs:
        raise UnsupportedGeometryError(
            f"depth-scaled 2D method cannot handle curved facades {arcs}; "
            "it requires flat planar surfaces"
        )
