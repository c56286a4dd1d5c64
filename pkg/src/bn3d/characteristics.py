"""Mesh extraction and envelope characteristics.

Marching cubes runs on a dense SDF grid with the classic 256-case table;
vertices live on grid edges (linear interpolation of the two SDF values),
and each crossed grid edge yields exactly one shared vertex, so welding is
deterministic by construction. Vertex labels come from the field's semantic
logits; triangle areas split fractionally by the vertex-label counts, and
window-to-wall ratio is the ratio of the window and wall area sums (roof,
door, and background vertices count toward neither).

Footprints are marching-squares contours of a near-ground SDF slice with a
fixed saddle rule (no asymptotic decider): ambiguous cells always keep the
two inside corners disconnected. Segments are oriented with the interior on
the left, so outer loops come out counter-clockwise and holes clockwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Bn3dError, GeometryError
from .mc_tables import TRI_COUNT, TRI_TABLE
from .semantics import SemanticClass

EPS_TRI = 1e-12      # sliver triangles below this area are dropped
IOU_RASTER = 1024    # rasterization resolution for polygon IoU
GRID_PAD = 1.0315    # bounding-sphere padding; odd factor avoids grid-plane hits


@dataclass(frozen=True)
class GridSpec:
    lo: np.ndarray
    hi: np.ndarray
    res: tuple[int, ...]

    def __post_init__(self):
        if len(self.res) not in (2, 3) or len(self.res) != self.lo.size:
            raise Bn3dError("grid must be 2D or 3D with matching bounds")
        if any(r < 2 for r in self.res):
            raise Bn3dError("grid resolution must be at least 2 per axis")
        if not np.all(self.hi > self.lo):
            raise Bn3dError("grid bounds must be non-degenerate")

    @property
    def cell(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.res)

    @staticmethod
    def for_field(field, res: int) -> "GridSpec":
        """Cubic grid containing the field's bounding sphere."""
        r = field.bound_radius * GRID_PAD
        c = field.bound_center
        return GridSpec(lo=c - r, hi=c + r, res=(res, res, res))

    @staticmethod
    def ground_slice(field, res: int) -> "GridSpec":
        r = field.bound_radius * GRID_PAD
        c = field.bound_center[:2]
        return GridSpec(lo=c - r, hi=c + r, res=(res, res))


@dataclass
class SemanticMesh:
    vertices: np.ndarray       # (V, 3) meters
    faces: np.ndarray          # (F, 3) int indices
    labels: np.ndarray | None  # (V,) uint8, None until assigned
    residual: np.ndarray       # (V,) |sdf| at vertices, QA

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive for outward-oriented meshes."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0)


def _evaluate_grid(sdf_fn, grid: GridSpec, chunk: int = 2_000_000) -> np.ndarray:
    nx, ny, nz = grid.res
    xs = np.linspace(grid.lo[0], grid.hi[0], nx + 1)
    ys = np.linspace(grid.lo[1], grid.hi[1], ny + 1)
    zs = np.linspace(grid.lo[2], grid.hi[2], nz + 1)
    vals = np.empty((nx + 1) * (ny + 1) * (nz + 1))
    pts = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    for lo in range(0, pts.shape[0], chunk):
        vals[lo : lo + chunk] = sdf_fn(pts[lo : lo + chunk])
    return vals.reshape(nx + 1, ny + 1, nz + 1)


def marching_cubes(field, grid: GridSpec, sdf_fn=None) -> SemanticMesh:
    """Triangulate the zero-level set of the field on the grid.

    ``sdf_fn`` overrides the field's sdf (used by tests); labels are left
    unset. An empty isosurface yields an empty mesh.
    """
    if len(grid.res) != 3:
        raise Bn3dError("marching cubes needs a 3D grid")
    fn = sdf_fn if sdf_fn is not None else field.sdf
    vals = _evaluate_grid(fn, grid)
    if not np.all(np.isfinite(vals)):
        raise GeometryError("field produced non-finite values on the grid")
    occ = vals < 0.0

    nx, ny, nz = grid.res
    xs = np.linspace(grid.lo[0], grid.hi[0], nx + 1)
    ys = np.linspace(grid.lo[1], grid.hi[1], ny + 1)
    zs = np.linspace(grid.lo[2], grid.hi[2], nz + 1)

    # cell case index, corner bit order: lower ring CCW then upper ring
    idx = np.zeros((nx, ny, nz), dtype=np.uint8)
    corner_shifts = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                     (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
    for bit, (dx, dy, dz) in enumerate(corner_shifts):
        idx |= (occ[dx : nx + dx, dy : ny + dy, dz : nz + dz] << bit).astype(np.uint8)

    active = np.flatnonzero((idx.ravel() != 0) & (idx.ravel() != 255))
    if active.size == 0:
        return SemanticMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                            None, np.zeros(0))
    cases = idx.ravel()[active]
    ai, aj, ak = np.unravel_index(active, (nx, ny, nz))

    # one vertex per crossed grid edge, for each of the three orientations
    vert_pieces = []
    edge_ids = []
    base = 0
    for axis, shape in ((0, (nx, ny + 1, nz + 1)),
                        (1, (nx + 1, ny, nz + 1)),
                        (2, (nx + 1, ny + 1, nz))):
        sl0 = [slice(None)] * 3
        sl1 = [slice(None)] * 3
        sl0[axis] = slice(0, -1)
        sl1[axis] = slice(1, None)
        f0 = vals[tuple(sl0)]
        f1 = vals[tuple(sl1)]
        crossed = (f0 < 0) != (f1 < 0)
        ids = np.full(shape, -1, dtype=np.int64)
        n_crossed = int(np.count_nonzero(crossed))
        ids[crossed] = base + np.arange(n_crossed)
        base += n_crossed
        t = f0[crossed] / (f0[crossed] - f1[crossed])
        ii, jj, kk = np.nonzero(crossed)
        pos = np.stack([xs[ii], ys[jj], zs[kk]], axis=1)
        pos[:, axis] += t * grid.cell[axis]
        vert_pieces.append(pos)
        edge_ids.append(ids)

    vertices = np.concatenate(vert_pieces, axis=0)

    ex, ey, ez = edge_ids
    # local edge -> global edge id, per active cell (12 columns)
    cell_edges = np.stack([
        ex[ai, aj, ak],            # e0
        ey[ai + 1, aj, ak],        # e1
        ex[ai, aj + 1, ak],        # e2
        ey[ai, aj, ak],            # e3
        ex[ai, aj, ak + 1],        # e4
        ey[ai + 1, aj, ak + 1],    # e5
        ex[ai, aj + 1, ak + 1],    # e6
        ey[ai, aj, ak + 1],        # e7
        ez[ai, aj, ak],            # e8
        ez[ai + 1, aj, ak],        # e9
        ez[ai + 1, aj + 1, ak],    # e10
        ez[ai, aj + 1, ak],        # e11
    ], axis=1)

    counts = TRI_COUNT[cases]
    faces = []
    for slot in range(5):  # a cell emits at most 5 triangles
        emit = counts > slot
        if not np.any(emit):
            break
        local = TRI_TABLE[cases[emit], 3 * slot : 3 * slot + 3]
        tri = np.take_along_axis(cell_edges[emit], local, axis=1)
        faces.append(tri)
    faces = np.concatenate(faces, axis=0)
    if np.any(faces < 0):
        raise GeometryError("marching cubes table referenced an uncrossed edge")
    # table winding points into the solid; flip for outward normals
    faces = faces[:, [0, 2, 1]]

    residual = np.abs(fn(vertices))
    return SemanticMesh(vertices=vertices, faces=faces.astype(np.int64),
                        labels=None, residual=residual)


def assign_vertex_semantics(mesh: SemanticMesh, field, chunk: int = 500_000) -> SemanticMesh:
    """Label each vertex by the argmax of the field's semantic logits.

    Exact ties resolve toward the lower label id.
    """
    labels = np.empty(mesh.vertices.shape[0], dtype=np.uint8)
    for lo in range(0, mesh.vertices.shape[0], chunk):
        logits = field.semantic_logits(mesh.vertices[lo : lo + chunk])
        labels[lo : lo + chunk] = np.argmax(logits, axis=1).astype(np.uint8)
    mesh.labels = labels
    return mesh


@dataclass(frozen=True)
class WwrResult:
    wwr: float
    window_area: float
    wall_area: float
    window_over_facade: float  # window / (window + wall), secondary convention


def wwr(mesh: SemanticMesh) -> WwrResult:
    """Window-to-wall ratio with fractional triangle weighting.

    A triangle of area a with k window vertices contributes (k/3) * a to the
    window area, likewise for wall; other classes contribute to neither.
    """
    if mesh.labels is None:
        raise Bn3dError("mesh labels must be assigned before computing wwr")
    areas = mesh.triangle_areas()
    keep = areas > EPS_TRI
    areas = areas[keep]
    tri_labels = mesh.labels[mesh.faces[keep]]
    n_window = np.sum(tri_labels == int(SemanticClass.WINDOW), axis=1)
    n_wall = np.sum(tri_labels == int(SemanticClass.WALL), axis=1)
    window_area = float(np.sum(areas * n_window) / 3.0)
    wall_area = float(np.sum(areas * n_wall) / 3.0)
    if wall_area <= 0.0:
        raise GeometryError("wall area is zero; window-to-wall ratio undefined")
    return WwrResult(
        wwr=window_area / wall_area,
        window_area=window_area,
        wall_area=wall_area,
        window_over_facade=window_area / (window_area + wall_area),
    )


# -- footprint ---------------------------------------------------------------

# marching-squares segments (start_edge, end_edge) per case, interior on the
# left; corner bits 1,2,4,8 = (0,0),(1,0),(1,1),(0,1); edges 0..3 = bottom,
# right, top, left. Saddles (5, 10) keep inside corners disconnected.
_MS_SEGMENTS: dict[int, list[tuple[int, int]]] = {
    0: [], 15: [],
    1: [(0, 3)], 2: [(1, 0)], 3: [(1, 3)], 4: [(2, 1)],
    5: [(0, 3), (2, 1)], 6: [(2, 0)], 7: [(2, 3)], 8: [(3, 2)],
    9: [(0, 2)], 10: [(1, 0), (3, 2)], 11: [(1, 2)], 12: [(3, 1)],
    13: [(0, 1)], 14: [(3, 0)],
}


@dataclass(frozen=True)
class FootprintPolygon:
    """Closed 2D loops; outer boundaries counter-clockwise, holes clockwise."""

    loops: tuple[np.ndarray, ...]

    @property
    def empty(self) -> bool:
        return len(self.loops) == 0

    def area(self) -> float:
        total = 0.0
        for loop in self.loops:
            x, y = loop[:, 0], loop[:, 1]
            total += 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        return total


def footprint(field, grid: GridSpec, eps_ground: float) -> FootprintPolygon:
    """Contour of {sdf <= 0} on the slice z = eps_ground."""
    if len(grid.res) != 2:
        raise Bn3dError("footprint needs a 2D grid")
    nx, ny = grid.res
    xs = np.linspace(grid.lo[0], grid.hi[0], nx + 1)
    ys = np.linspace(grid.lo[1], grid.hi[1], ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, eps_ground)], axis=1)
    vals = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], 2_000_000):
        vals[lo : lo + 2_000_000] = field.sdf(pts[lo : lo + 2_000_000])
    vals = vals.reshape(nx + 1, ny + 1)
    occ = vals < 0.0
    if not np.any(occ):
        return FootprintPolygon(loops=())

    case = (occ[:-1, :-1].astype(np.uint8)
            | (occ[1:, :-1] << 1).astype(np.uint8)
            | (occ[1:, 1:] << 2).astype(np.uint8)
            | (occ[:-1, 1:] << 3).astype(np.uint8))

    # global 2D edge ids: x-edges then y-edgesceil
    x_crossed = occ[:-1, :] != occ[1:, :]
    y_crossed = occ[:, :-1] != occ[:, 1:]
    x_ids = np.full((nx, ny + 1), -1, dtype=np.int64)
    y_ids = np.full((nx + 1, ny), -1, dtype=np.int64)
    n_x = int(np.count_nonzero(x_crossed))
    x_ids[x_crossed] = np.arange(n_x)
    y_ids[y_crossed] = n_x + np.arange(int(np.count_nonzero(y_crossed)))

    points = np.empty((n_x + int(np.count_nonzero(y_crossed)), 2))
    ii, jj = np.nonzero(x_crossed)
    t = vals[ii, jj] / (vals[ii, jj] - vals[ii + 1, jj])
    points[x_ids[x_crossed]] = np.stack([xs[ii] + t * grid.cell[0], ys[jj]], axis=1)
    ii, jj = np.nonzero(y_crossed)
    t = vals[ii, jj] / (vals[ii, jj] - vals[ii, jj + 1])
    points[y_ids[y_crossed]] = np.stack([xs[ii], ys[jj] + t * grid.cell[1]], axis=1)

    # collect directed segments (global start edge -> global end edge)
    succ: dict[int, int] = {}
    ci, cj = np.nonzero((case != 0) & (case != 15))
    edge_lookup = [
        lambda i, j: x_ids[i, j],        # bottom
        lambda i, j: y_ids[i + 1, j],    # right
        lambda i, j: x_ids[i, j + 1],    # top
        lambda i, j: y_ids[i, j],        # left
    ]
    for i, j in zip(ci, cj):
        for start, end in _MS_SEGMENTS[int(case[i, j])]:
            succ[int(edge_lookup[start](i, j))] = int(edge_lookup[end](i, j))

    loops = []
    visited: set[int] = set()
    for start in sorted(succ):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = succ[start]
        closed = True
        while cur != start:
            if cur in visited or cur not in succ:
                closed = False  # open chain: region clipped by the grid
                break
            loop.append(cur)
            visited.add(cur)
            cur = succ[cur]
        if closed and len(loop) >= 3:
            loops.append(points[np.array(loop)])
    return FootprintPolygon(loops=tuple(loops))


def rasterize_loops(loops, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd inside test of grid points against a set of closed loops."""
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    inside = np.zeros(gx.shape, dtype=bool)
    for loop in loops:
        a = loop
        b = np.roll(loop, -1, axis=0)
        for (ax, ay), (bx, by) in zip(a, b):
            if ay == by:
                continue
            straddle = (ay > gy) != (by > gy)
            xint = ax + (gy - ay) * (bx - ax) / (by - ay)
            inside ^= straddle & (gx < xint)
    return inside


def footprint_iou(estimated: FootprintPolygon | np.ndarray,
                  truth: FootprintPolygon | np.ndarray,
                  raster: int = IOU_RASTER) -> float:
    """Intersection-over-union by rasterization on the union bounding box."""
    est_loops = estimated.loops if isinstance(estimated, FootprintPolygon) else (estimated,)
    true_loops = truth.loops if isinstance(truth, FootprintPolygon) else (truth,)
    if len(est_loops) == 0 or len(true_loops) == 0:
        return 0.0
    allpts = np.vstack(list(est_loops) + list(true_loops))
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    pad = 0.01 * np.maximum(hi - lo, 1e-9)
    lo -= pad
    hi += pad
    xs = lo[0] + (np.arange(raster) + 0.5) * (hi[0] - lo[0]) / raster
    ys = lo[1] + (np.arange(raster) + 0.5) * (hi[1] - lo[1]) / raster
    a = rasterize_loops(est_loops, xs, ys)
    b = rasterize_loops(true_loops, xs, ys)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return float(np.count_nonzero(a & b) / union)


# -- exports -------------------------------------------------------------------


def mesh_to_obj(mesh: SemanticMesh, path, label_csv_path=None) -> None:
    """OBJ with per-vertex labels in a comment block; optional sidecar CSV."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("# semantic mesh; vertex labels listed as '# label <idx> <id>'\n")
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        if mesh.labels is not None:
            for i, lab in enumerate(mesh.labels):
                f.write(f"# label {i} {int(lab)}\n")
        for tri in mesh.faces:
            f.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")
    if label_csv_path is not None and mesh.labels is not None:
        with open(label_csv_path, "w", encoding="utf-8") as f:
            f.write("vertex_index,label_id\n")
            for i, lab in enumerate(mesh.labels):
                f.write(f"{i},{int(lab)}\n")


def footprint_to_csv(fp: FootprintPolygon, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("loop,vertex,x,y\n")
        for li, loop in enumerate(fp.loops):
            for vi, (x, y) in enumerate(loop):
                f.write(f"{li},{vi},{x:.9g},{y:.9g}\n")
