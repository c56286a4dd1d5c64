"""Procedural buildings as analytic semantic SDF scenes.

A :class:`BuildingSpec` describes footprint, height, per-facade window
grids, and optional door/balcony/arc features. :func:`build_scene` turns it
into an :class:`AnalyticScene` (solids + labeled patches) whose SDF is
exact, and :func:`ground_truth` computes the window/wall areas and
footprint in closed form. Windows and doors are flush labeled patches, not
recessed solids, so facade area splits exactly into wall + window + door and
the closed-form bookkeeping is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .primitives import (
    CylinderBandPatch,
    Footprint2D,
    Patch,
    PolyPatch,
    PrismSolid,
    RectPatch,
    Solid,
)
from .semantics import SemanticClass

KINDS = ("skyscraper", "l_shaped", "curved", "balcony")

_ARC_SEGMENTS = 128  # arc polygonization for the exported footprint polygon


@dataclass(frozen=True)
class WindowGrid:
    rows: int
    cols: int
    width: float
    height: float
    sill: float = 0.5
    lintel: float = 0.4


@dataclass(frozen=True)
class BalconySpec:
    facade: int
    offset: float  # left edge along the facade, meters
    z: float       # bottom height, meters
    width: float
    height: float
    depth: float   # protrusion beyond the facade plane


@dataclass(frozen=True)
class DoorSpec:
    facade: int
    offset: float
    width: float
    height: float


@dataclass(frozen=True)
class BuildingSpec:
    kind: str
    footprint: np.ndarray  # (K, 2) counter-clockwise, meters
    height: float
    floors: int
    windows: dict[int, WindowGrid]
    roof_thickness: float = 0.3
    arc_edge: int | None = None
    arc_radius: float = 0.0
    balconies: tuple[BalconySpec, ...] = ()
    door: DoorSpec | None = None

    @property
    def wall_band_height(self) -> float:
        return self.height - self.roof_thickness

    @property
    def num_flat_facades(self) -> int:
        return self.footprint.shape[0]

    @property
    def arc_facade_id(self) -> int | None:
        return self.footprint.shape[0] if self.kind == "curved" else None


@dataclass(frozen=True)
class GroundTruth:
    wwr: float
    window_area: float
    wall_area: float
    footprint: np.ndarray  # (M, 2) counter-clockwise
    height: float
    footprint_area: float
    roof_area: float
    door_area: float

    def to_dict(self) -> dict:
        return {
            "wwr": self.wwr,
            "window_area": self.window_area,
            "wall_area": self.wall_area,
            "footprint": self.footprint.tolist(),
            "height": self.height,
            "footprint_area": self.footprint_area,
            "roof_area": self.roof_area,
            "door_area": self.door_area,
        }

    @staticmethod
    def from_dict(d: dict) -> "GroundTruth":
        return GroundTruth(
            wwr=float(d["wwr"]),
            window_area=float(d["window_area"]),
            wall_area=float(d["wall_area"]),
            footprint=np.asarray(d["footprint"], dtype=float),
            height=float(d["height"]),
            footprint_area=float(d["footprint_area"]),
            roof_area=float(d["roof_area"]),
            door_area=float(d["door_area"]),
        )


@dataclass(frozen=True)
class FacadeInfo:
    """Geometry of one facade, used for pose generation and baselines."""

    facade_id: int
    shape: str  # "flat" | "arc"
    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    width: float   # u extent (arc length for arc facades)
    height: float  # wall band height
    outward: np.ndarray
    center: np.ndarray
    window_area: float
    wall_area: float


@dataclass(frozen=True)
class AnalyticScene:
    """Immutable CSG world: solids give the SDF, patches give labels."""

    solids: tuple[Solid, ...]
    patches: tuple[Patch, ...]
    patch_facade: np.ndarray  # facade id per patch, -1 for non-facade patches
    facades: tuple[FacadeInfo, ...]
    bound_center: np.ndarray
    bound_radius: float

    def sdf(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        d = np.full(p.shape[0], np.inf)
        for solid in self.solids:
            d = np.minimum(d, solid.sdf(p))
        return d

    def patch_distances(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return np.stack([patch.distance(p) for patch in self.patches], axis=1)

    def nearest_patch(self, p: np.ndarray) -> np.ndarray:
        # argmin keeps the first minimum, which is the tie-break rule:
        # earlier patches win exact ties.
        return np.argmin(self.patch_distances(p), axis=1)

    def label(self, p: np.ndarray, band: float) -> np.ndarray:
        """Semantic label of the nearest patch; BACKGROUND outside the band."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        labels = np.full(p.shape[0], int(SemanticClass.BACKGROUND), dtype=np.uint8)
        near = np.abs(self.sdf(p)) <= band
        if np.any(near):
            idx = self.nearest_patch(p[near])
            cls = np.array([int(patch.cls) for patch in self.patches], dtype=np.uint8)
            labels[near] = cls[idx]
        return labels

    def facade_id_at(self, p: np.ndarray, band: float) -> np.ndarray:
        """Facade id owning each near-surface point, -1 elsewhere."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        out = np.full(p.shape[0], -1, dtype=np.int32)
        near = np.abs(self.sdf(p)) <= band
        if np.any(near):
            idx = self.nearest_patch(p[near])
            out[near] = self.patch_facade[idx]
        return out


def polygon_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _validate_footprint(verts: np.ndarray) -> None:
    if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
        raise SpecError("footprint must be an (K, 2) array with K >= 3")
    if polygon_area(verts) <= 0:
        raise SpecError("footprint polygon must be counter-clockwise with positive area")
    k = verts.shape[0]
    # simple-polygon check: no two non-adjacent edges intersect
    for i in range(k):
        a0, a1 = verts[i], verts[(i + 1) % k]
        for j in range(i + 1, k):
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue
            b0, b1 = verts[j], verts[(j + 1) % k]
            if _segments_intersect(a0, a1, b0, b1):
                raise SpecError(f"footprint edges {i} and {j} intersect; polygon must be simple")


def _segments_intersect(a0, a1, b0, b1) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(b0, b1, a0)
    d2 = orient(b0, b1, a1)
    d3 = orient(a0, a1, b0)
    d4 = orient(a0, a1, b1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _window_rects(grid: WindowGrid, width: float, band_height: float,
                  facade_id: int) -> list[tuple[float, float, float, float]]:
    """Window rectangles (u0, v0, u1, v1) for one facade; validates margins."""
    if grid.rows < 1 or grid.cols < 1:
        raise SpecError(f"facade {facade_id}: window grid needs rows, cols >= 1")
    if grid.width <= 0 or grid.height <= 0:
        raise SpecError(f"facade {facade_id}: window size must be positive")
    if grid.sill <= 0 or grid.lintel <= 0:
        raise SpecError(f"facade {facade_id}: sill and lintel margins must be positive")
    pitch_u = width / grid.cols
    span_v = band_height - grid.sill - grid.lintel
    if span_v <= 0:
        raise SpecError(f"facade {facade_id}: margins leave no room for windows")
    pitch_v = span_v / grid.rows
    if grid.width >= pitch_u:
        raise SpecError(
            f"facade {facade_id}: window width {grid.width} does not fit column pitch {pitch_u:.3f}"
        )
    if grid.height >= pitch_v:
        raise SpecError(
            f"facade {facade_id}: window height {grid.height} does not fit row pitch {pitch_v:.3f}"
        )
    rects = []
    for r in range(grid.rows):
        vc = grid.sill + (r + 0.5) * pitch_v
        for c in range(grid.cols):
            uc = (c + 0.5) * pitch_u
            rects.append((uc - 0.5 * grid.width, vc - 0.5 * grid.height,
                          uc + 0.5 * grid.width, vc + 0.5 * grid.height))
    return rects


def _rects_overlap(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def validate_spec(spec: BuildingSpec) -> None:
    if spec.kind not in KINDS:
        raise SpecError(f"unknown building kind {spec.kind!r}; expected one of {KINDS}")
    _validate_footprint(spec.footprint)
    if spec.height <= 0:
        raise SpecError("height must be positive")
    if spec.floors < 1:
        raise SpecError("floors must be >= 1")
    if spec.roof_thickness < 0 or spec.roof_thickness >= spec.height:
        raise SpecError("roof thickness must lie in [0, height)")
    k = spec.footprint.shape[0]
    if spec.kind == "curved":
        if spec.arc_edge is None or not (0 <= spec.arc_edge < k):
            raise SpecError("curved kind needs a valid arc_edge index")
        edge_len = float(np.linalg.norm(spec.footprint[(spec.arc_edge + 1) % k] - spec.footprint[spec.arc_edge]))
        if not (0 < spec.arc_radius < 0.5 * edge_len):
            raise SpecError("arc_radius must be in (0, edge_length / 2)")
    elif spec.arc_edge is not None or spec.arc_radius:
        raise SpecError("arc parameters are only valid for the curved kind")
    for fid in spec.windows:
        max_fid = k if spec.kind == "curved" else k - 1
        if not (0 <= fid <= max_fid):
            raise SpecError(f"window grid references facade {fid}, but facades are 0..{max_fid}")
        if spec.kind == "curved" and fid == spec.arc_edge:
            raise SpecError("the straight remainder of the arc edge cannot carry windows")


def _edge_frames(verts: np.ndarray):
    """Per-edge (origin2, u2, outward2, length). CCW polygon: outward is right of u."""
    k = verts.shape[0]
    frames = []
    for i in range(k):
        a = verts[i]
        b = verts[(i + 1) % k]
        e = b - a
        length = float(np.linalg.norm(e))
        u = e / length
        outward = np.array([u[1], -u[0]])
        frames.append((a, u, outward, length))
    return frames


def build_scene(spec: BuildingSpec) -> AnalyticScene:
    """Construct the analytic scene; raises :class:`SpecError` on invalid specs."""
    validate_spec(spec)
    verts = spec.footprint
    k = verts.shape[0]
    h_wall = spec.wall_band_height
    frames = _edge_frames(verts)
    up = np.array([0.0, 0.0, 1.0])

    discs = ()
    if spec.kind == "curved":
        a, u, outward, length = frames[spec.arc_edge]
        mid = a + 0.5 * length * u
        discs = ((float(mid[0]), float(mid[1]), spec.arc_radius),)
    footprint2d = Footprint2D(polygons=(verts.copy(),), discs=discs)

    solids: list[Solid] = [PrismSolid(footprint2d, 0.0, spec.height)]

    # window rectangles per facade, in facade (u, v) chart coordinates
    facade_windows: dict[int, list[tuple[float, float, float, float]]] = {}
    for fid, grid in spec.windows.items():
        if spec.kind == "curved" and fid == spec.arc_facade_id:
            width = np.pi * spec.arc_radius
        else:
            width = frames[fid][3]
        facade_windows[fid] = _window_rects(grid, width, h_wall, fid)

    facade_extra_holes: dict[int, list[tuple[float, float, float, float]]] = {i: [] for i in range(k)}
    door_patch = None
    if spec.door is not None:
        d = spec.door
        if not (0 <= d.facade < k):
            raise SpecError("door facade index out of range")
        a, u, outward, length = frames[d.facade]
        if not (0 < d.offset and d.offset + d.width < length and 0 < d.height < h_wall):
            raise SpecError("door does not fit inside its facade")
        rect = (d.offset, 0.0, d.offset + d.width, d.height)
        for win in facade_windows.get(d.facade, []):
            if _rects_overlap(rect, win):
                raise SpecError("door overlaps a window")
        facade_extra_holes[d.facade].append(rect)
        door_patch = RectPatch(
            origin=np.array([a[0], a[1], 0.0]) + d.offset * np.array([u[0], u[1], 0.0]),
            u_axis=np.array([u[0], u[1], 0.0]),
            v_axis=up,
            u_len=d.width,
            v_len=d.height,
            cls=SemanticClass.DOOR,
        )

    balcony_embed = 0.05  # buried into the facade so union surfaces never coincide
    balcony_patches: list[RectPatch] = []
    for b in spec.balconies:
        if not (0 <= b.facade < k):
            raise SpecError("balcony facade index out of range")
        a, u, outward, length = frames[b.facade]
        if not (0 < b.offset and b.offset + b.width < length):
            raise SpecError("balcony does not fit along its facade")
        if not (0 < b.z and b.z + b.height < h_wall):
            raise SpecError("balcony does not fit the wall band vertically")
        if b.depth <= 0:
            raise SpecError("balcony depth must be positive")
        rect = (b.offset, b.z, b.offset + b.width, b.z + b.height)
        for win in facade_windows.get(b.facade, []):
            if _rects_overlap(rect, win):
                raise SpecError("balcony overlaps a window")
        for other in facade_extra_holes[b.facade]:
            if _rects_overlap(rect, other):
                raise SpecError("balcony overlaps another facade feature")
        facade_extra_holes[b.facade].append(rect)

        u3 = np.array([u[0], u[1], 0.0])
        n3 = np.array([outward[0], outward[1], 0.0])
        base = np.array([a[0], a[1], 0.0]) + b.offset * u3 + b.z * up
        # extruded rectangle spanning [-embed, depth] along the outward normal,
        # so the box surface never coincides with the facade plane
        c0 = (base - balcony_embed * n3)[:2]
        fp_rect = np.array([
            c0,
            c0 + (b.depth + balcony_embed) * outward,
            c0 + (b.depth + balcony_embed) * outward + b.width * u,
            c0 + b.width * u,
        ])
        if polygon_area(fp_rect) < 0:
            fp_rect = fp_rect[::-1].copy()
        solids.append(PrismSolid(Footprint2D(polygons=(fp_rect,)), b.z, b.z + b.height))
        balcony_patches.extend([
            RectPatch(base + b.depth * n3, u3, up, b.width, b.height, SemanticClass.WALL),
            RectPatch(base, n3, up, b.depth, b.height, SemanticClass.WALL),
            RectPatch(base + b.width * u3, n3, up, b.depth, b.height, SemanticClass.WALL),
            RectPatch(base + b.height * up, u3, n3, b.width, b.depth, SemanticClass.WALL),
            RectPatch(base, u3, n3, b.width, b.depth, SemanticClass.WALL),
        ])

    patches: list[Patch] = []
    patch_facade: list[int] = []
    facades: list[FacadeInfo] = []

    def add(patch: Patch, fid: int) -> None:
        patches.append(patch)
        patch_facade.append(fid)

    # windows first so exact boundary ties resolve toward the smaller feature
    for fid in sorted(facade_windows):
        rects = facade_windows[fid]
        if spec.kind == "curved" and fid == spec.arc_facade_id:
            a, u, outward, length = frames[spec.arc_edge]
            mid = a + 0.5 * length * u
            theta_mid = float(np.arctan2(outward[1], outward[0]))
            r = spec.arc_radius
            smax = 0.5 * np.pi * r  # half the arc length; chart u runs [0, pi*r]
            for (u0, v0, u1, v1) in rects:
                add(CylinderBandPatch(
                    (float(mid[0]), float(mid[1])), r,
                    theta_mid=theta_mid + (0.5 * (u0 + u1) - smax) / r,
                    theta_half=(u1 - u0) / (2.0 * r),
                    z0=v0, z1=v1, cls=SemanticClass.WINDOW), fid)
        else:
            a, u, outward, length = frames[fid]
            u3 = np.array([u[0], u[1], 0.0])
            origin = np.array([a[0], a[1], 0.0])
            for (u0, v0, u1, v1) in rects:
                add(RectPatch(origin + u0 * u3 + v0 * up, u3, up, u1 - u0, v1 - v0,
                              SemanticClass.WINDOW), fid)

    if door_patch is not None:
        add(door_patch, spec.door.facade)
    for p in balcony_patches:
        add(p, -1)

    # wall band per flat facade, with window/door/balcony holes
    for fid in range(k):
        a, u, outward, length = frames[fid]
        u3 = np.array([u[0], u[1], 0.0])
        origin = np.array([a[0], a[1], 0.0])
        holes = tuple(facade_windows.get(fid, [])) + tuple(facade_extra_holes[fid])
        add(RectPatch(origin, u3, up, length, h_wall, SemanticClass.WALL, holes=holes), fid)
        if spec.roof_thickness > 0:
            add(RectPatch(origin + h_wall * up, u3, up, length, spec.roof_thickness,
                          SemanticClass.ROOF), -1)
        out3 = np.array([outward[0], outward[1], 0.0])
        win_area = sum((r[2] - r[0]) * (r[3] - r[1]) for r in facade_windows.get(fid, []))
        covered = sum((r[2] - r[0]) * (r[3] - r[1]) for r in facade_extra_holes[fid])
        facades.append(FacadeInfo(
            facade_id=fid, shape="flat",
            origin=origin, u_axis=u3, v_axis=up.copy(),
            width=length, height=h_wall, outward=out3,
            center=origin + 0.5 * length * u3 + 0.5 * h_wall * up,
            window_area=win_area,
            wall_area=length * h_wall - win_area - covered,
        ))

    if spec.kind == "curved":
        fid = spec.arc_facade_id
        a, u, outward, length = frames[spec.arc_edge]
        mid = a + 0.5 * length * u
        theta_mid = float(np.arctan2(outward[1], outward[0]))
        arc_len = np.pi * spec.arc_radius
        win_rects = facade_windows.get(fid, [])
        smax = 0.5 * arc_len
        holes = tuple((u0 - smax, v0, u1 - smax, v1) for (u0, v0, u1, v1) in win_rects)
        add(CylinderBandPatch((float(mid[0]), float(mid[1])), spec.arc_radius, theta_mid,
                              0.5 * np.pi, 0.0, h_wall, SemanticClass.WALL, holes=holes), fid)
        if spec.roof_thickness > 0:
            add(CylinderBandPatch((float(mid[0]), float(mid[1])), spec.arc_radius, theta_mid,
                                  0.5 * np.pi, h_wall, spec.height, SemanticClass.ROOF), -1)
        out3 = np.array([outward[0], outward[1], 0.0])
        center3 = np.array([mid[0], mid[1], 0.0]) + spec.arc_radius * out3 + 0.5 * h_wall * up
        win_area = sum((r[2] - r[0]) * (r[3] - r[1]) for r in win_rects)
        facades.append(FacadeInfo(
            facade_id=fid, shape="arc",
            origin=np.array([mid[0], mid[1], 0.0]), u_axis=np.array([u[0], u[1], 0.0]),
            v_axis=up.copy(), width=arc_len, height=h_wall, outward=out3,
            center=center3, window_area=win_area,
            wall_area=arc_len * h_wall - win_area,
        ))

    add(PolyPatch(footprint2d, spec.height, SemanticClass.ROOF), -1)
    # the underside touches the ground plane; it is not part of the visible
    # envelope and must stay out of the wall tally, hence BACKGROUND
    add(PolyPatch(footprint2d, 0.0, SemanticClass.BACKGROUND), -1)

    lo, hi = _scene_bounds(solids)
    center = 0.5 * (lo + hi)
    radius = float(np.linalg.norm(hi - center))
    return AnalyticScene(
        solids=tuple(solids),
        patches=tuple(patches),
        patch_facade=np.array(patch_facade, dtype=np.int32),
        facades=tuple(facades),
        bound_center=center,
        bound_radius=radius * 1.0001,
    )


def _scene_bounds(solids) -> tuple[np.ndarray, np.ndarray]:
    los, his = [], []
    for solid in solids:
        if isinstance(solid, PrismSolid):
            pts = np.vstack([poly for poly in solid.footprint.polygons])
            lo2 = pts.min(axis=0)
            hi2 = pts.max(axis=0)
            for cx, cy, r in solid.footprint.discs:
                lo2 = np.minimum(lo2, [cx - r, cy - r])
                hi2 = np.maximum(hi2, [cx + r, cy + r])
            los.append(np.array([lo2[0], lo2[1], solid.z0]))
            his.append(np.array([hi2[0], hi2[1], solid.z1]))
        else:
            los.append(solid.center - solid.half)
            his.append(solid.center + solid.half)
    return np.min(los, axis=0), np.max(his, axis=0)


def scene_sdf(scene: AnalyticScene, p: np.ndarray) -> np.ndarray:
    return scene.sdf(p)


def scene_label(scene: AnalyticScene, p: np.ndarray, band: float) -> np.ndarray:
    return scene.label(p, band)


def footprint_outline(spec: BuildingSpec) -> np.ndarray:
    """Footprint polygon with the arc (if any) polygonized, counter-clockwise."""
    verts = spec.footprint
    k = verts.shape[0]
    if spec.kind != "curved":
        return verts.copy()
    frames = _edge_frames(verts)
    out = []
    for i in range(k):
        a, u, outward, length = frames[i]
        out.append(a)
        if i == spec.arc_edge:
            mid = a + 0.5 * length * u
            r = spec.arc_radius
            theta_u = float(np.arctan2(u[1], u[0]))
            # arc from mid - r*u to mid + r*u bulging outward, CCW traversal
            angles = theta_u - np.pi + np.linspace(0.0, np.pi, _ARC_SEGMENTS + 1)
            arc = mid[None, :] + r * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            out.extend(arc)
    return np.array(out)


def ground_truth(spec: BuildingSpec) -> GroundTruth:
    """Closed-form characteristics; exact for every generated spec."""
    validate_spec(spec)
    verts = spec.footprint
    k = verts.shape[0]
    h_wall = spec.wall_band_height
    frames = _edge_frames(verts)

    window_area = 0.0
    wall_area = 0.0
    perimeter = 0.0
    for fid in range(k):
        length = frames[fid][3]
        if spec.kind == "curved" and fid == spec.arc_edge:
            length = length - 2.0 * spec.arc_radius
        perimeter += length
        wall_area += length * h_wall
    if spec.kind == "curved":
        arc_len = np.pi * spec.arc_radius
        perimeter += arc_len
        wall_area += arc_len * h_wall

    for fid, grid in spec.windows.items():
        window_area += grid.rows * grid.cols * grid.width * grid.height
    wall_area -= window_area

    door_area = 0.0
    if spec.door is not None:
        door_area = spec.door.width * spec.door.height
        wall_area -= door_area

    for b in spec.balconies:
        # the protruding box swaps a w*h facade hole for a w*h front face and
        # adds four exposed sides of depth d
        wall_area += 2.0 * (b.width + b.height) * b.depth

    fp_area = polygon_area(verts)
    if spec.kind == "curved":
        fp_area += 0.5 * np.pi * spec.arc_radius**2
    roof_area = fp_area + perimeter * spec.roof_thickness

    if wall_area <= 0:
        raise SpecError("windows and features exceed the available wall area")
    return GroundTruth(
        wwr=window_area / wall_area,
        window_area=window_area,
        wall_area=wall_area,
        footprint=footprint_outline(spec),
        height=spec.height,
        footprint_area=fp_area,
        roof_area=roof_area,
        door_area=door_area,
    )


def spec_to_dict(spec: BuildingSpec) -> dict:
    d = {
        "kind": spec.kind,
        "footprint": spec.footprint.tolist(),
        "height": spec.height,
        "floors": spec.floors,
        "roof_thickness": spec.roof_thickness,
        "windows": {
            str(fid): {
                "rows": g.rows, "cols": g.cols, "width": g.width,
                "height": g.height, "sill": g.sill, "lintel": g.lintel,
            }
            for fid, g in sorted(spec.windows.items())
        },
    }
    if spec.kind == "curved":
        d["arc_edge"] = spec.arc_edge
        d["arc_radius"] = spec.arc_radius
    if spec.balconies:
        d["balconies"] = [
            {"facade": b.facade, "offset": b.offset, "z": b.z,
             "width": b.width, "height": b.height, "depth": b.depth}
            for b in spec.balconies
        ]
    if spec.door is not None:
        d["door"] = {"facade": spec.door.facade, "offset": spec.door.offset,
                     "width": spec.door.width, "height": spec.door.height}
    return d


def spec_from_dict(d: dict) -> BuildingSpec:
    try:
        windows = {
            int(fid): WindowGrid(
                rows=int(g["rows"]), cols=int(g["cols"]),
                width=float(g["width"]), height=float(g["height"]),
                sill=float(g.get("sill", 0.5)), lintel=float(g.get("lintel", 0.4)),
            )
            for fid, g in d.get("windows", {}).items()
        }
        spec = BuildingSpec(
            kind=str(d["kind"]),
            footprint=np.asarray(d["footprint"], dtype=float),
            height=float(d["height"]),
            floors=int(d["floors"]),
            windows=windows,
            roof_thickness=float(d.get("roof_thickness", 0.3)),
            arc_edge=d.get("arc_edge"),
            arc_radius=float(d.get("arc_radius", 0.0)),
            balconies=tuple(
                BalconySpec(facade=int(b["facade"]), offset=float(b["offset"]),
                            z=float(b["z"]), width=float(b["width"]),
                            height=float(b["height"]), depth=float(b["depth"]))
                for b in d.get("balconies", [])
            ),
            door=None if d.get("door") is None else DoorSpec(
                facade=int(d["door"]["facade"]), offset=float(d["door"]["offset"]),
                width=float(d["door"]["width"]), height=float(d["door"]["height"]),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed building spec: {exc}") from exc
    validate_spec(spec)
    return spec


def load_spec(path) -> BuildingSpec:
    with open(path, "r", encoding="utf-8") as f:
        return spec_from_dict(json.load(f))


def save_spec(spec: BuildingSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec_to_dict(spec), f, indent=2, sort_keys=True)
        f.write("\n")


def sampled_surface_areas(scene: AnalyticScene, samples: int = 1_000_000,
                          seed: int = 0) -> dict[SemanticClass, float]:
    """Monte-Carlo per-class surface area, independent of the closed form.

    Each patch's chart rectangle is sampled uniformly; a sample counts for
    its class only if it lies on the scene surface (|sdf| ~ 0) and the patch
    is the nearest one, so covered regions and holes attribute correctly.
    """
    from . import rng as _rng

    areas: dict[SemanticClass, float] = {c: 0.0 for c in SemanticClass}
    charts = []
    total_chart = 0.0
    for pid, patch in enumerate(scene.patches):
        if isinstance(patch, RectPatch):
            chart = patch.u_len * patch.v_len
        elif isinstance(patch, CylinderBandPatch):
            chart = 2.0 * patch.radius * patch.theta_half * (patch.z1 - patch.z0)
        else:
            fp = patch.footprint
            pts = np.vstack(fp.polygons)
            lo = pts.min(axis=0)
            hi = pts.max(axis=0)
            for cx, cy, r in fp.discs:
                lo = np.minimum(lo, [cx - r, cy - r])
                hi = np.maximum(hi, [cx + r, cy + r])
            chart = float((hi[0] - lo[0]) * (hi[1] - lo[1]))
        charts.append(chart)
        total_chart += chart

    gen = _rng.stream(seed, 7701)
    tol = 1e-9 * max(1.0, scene.bound_radius)
    for pid, patch in enumerate(scene.patches):
        n = max(256, int(round(samples * charts[pid] / total_chart)))
        uv = gen.random((n, 2))
        if isinstance(patch, RectPatch):
            pu = uv[:, 0] * patch.u_len
            pv = uv[:, 1] * patch.v_len
            pts = patch.origin[None, :] + pu[:, None] * patch.u_axis[None, :] \
                + pv[:, None] * patch.v_axis[None, :]
        elif isinstance(patch, CylinderBandPatch):
            theta = patch.theta_mid + (uv[:, 0] * 2.0 - 1.0) * patch.theta_half
            z = patch.z0 + uv[:, 1] * (patch.z1 - patch.z0)
            pts = np.stack([
                patch.center[0] + patch.radius * np.cos(theta),
                patch.center[1] + patch.radius * np.sin(theta),
                z,
            ], axis=1)
        else:
            fp = patch.footprint
            poly_pts = np.vstack(fp.polygons)
            lo = poly_pts.min(axis=0)
            hi = poly_pts.max(axis=0)
            for cx, cy, r in fp.discs:
                lo = np.minimum(lo, [cx - r, cy - r])
                hi = np.maximum(hi, [cx + r, cy + r])
            xy = lo[None, :] + uv * (hi - lo)[None, :]
            pts = np.column_stack([xy, np.full(n, patch.z)])
        on_surface = np.abs(scene.sdf(pts)) <= tol
        if not np.any(on_surface):
            continue
        owned = scene.nearest_patch(pts[on_surface]) == pid
        frac = np.count_nonzero(owned) / n
        areas[patch.cls] += charts[pid] * frac
    return areas
