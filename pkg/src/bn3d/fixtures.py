"""Canonical building fixtures.

These are hand-designed specs exercising each generator kind, reused by the
test-suite and exposed through the CLI as ``preset:<name>``. Dimensions sit
inside the documented characteristic ranges for each type.

Footprints are deliberately rotated off the axes: grid-aligned facades are
a degenerate best/worst case for mesh-based area estimates (every mesh
vertex lands on the sampling lattice), and reconstructed buildings are
never axis-aligned in practice.
"""

from __future__ import annotations

import numpy as np

from .scene import BalconySpec, BuildingSpec, DoorSpec, WindowGrid


def _rot(verts: np.ndarray, degrees: float) -> np.ndarray:
    th = np.radians(degrees)
    r = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    return verts @ r.T


def unit_cube() -> BuildingSpec:
    """1 m cube, no windows, no roof band."""
    return BuildingSpec(
        kind="skyscraper",
        footprint=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        height=1.0,
        floors=1,
        windows={},
        roof_thickness=0.0,
    )


def cube_one_window() -> BuildingSpec:
    """Unit cube with a single 0.5 x 0.5 window on facade 0."""
    return BuildingSpec(
        kind="skyscraper",
        footprint=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        height=1.0,
        floors=1,
        windows={0: WindowGrid(rows=1, cols=1, width=0.5, height=0.5, sill=0.2, lintel=0.2)},
        roof_thickness=0.0,
    )


def skyscraper() -> BuildingSpec:
    """Tower with 36 windows; closed-form window/wall areas 62.18 / 462.26 m2.

    Column counts differ per facade so window placements never share a
    phase against any sampling lattice.
    """
    wall_band = (462.26 + 62.18) / 36.0  # perimeter 36 m
    per_window = 62.18 / 36.0
    width = 1.44
    height = per_window / width
    return BuildingSpec(
        kind="skyscraper",
        footprint=_rot(np.array([[-5.0, -4.0], [5.0, -4.0], [5.0, 4.0], [-5.0, 4.0]]), 11.0),
        height=wall_band + 0.4,
        floors=3,
        windows={
            0: WindowGrid(rows=3, cols=4, width=width, height=height),
            1: WindowGrid(rows=3, cols=3, width=width, height=height),
            2: WindowGrid(rows=3, cols=3, width=width, height=height),
            3: WindowGrid(rows=3, cols=2, width=width, height=height),
        },
        roof_thickness=0.4,
    )


def l_shaped() -> BuildingSpec:
    """Six-corner L-plan block, four window rows, one door."""
    footprint = _rot(np.array([
        [-8.0, -8.0], [8.0, -8.0], [8.0, 1.0],
        [-1.0, 1.0], [-1.0, 8.0], [-8.0, 8.0],
    ]), 23.0)
    return BuildingSpec(
        kind="l_shaped",
        footprint=footprint,
        height=12.0,
        floors=4,
        windows={
            0: WindowGrid(rows=4, cols=6, width=1.3, height=1.1),
            1: WindowGrid(rows=4, cols=3, width=1.3, height=1.1),
            2: WindowGrid(rows=4, cols=3, width=1.3, height=1.1),
            3: WindowGrid(rows=4, cols=2, width=1.3, height=1.1),
            4: WindowGrid(rows=4, cols=2, width=1.3, height=1.1),
            5: WindowGrid(rows=4, cols=6, width=1.3, height=1.1),
        },
        roof_thickness=0.4,
        door=DoorSpec(facade=0, offset=7.55, width=0.9, height=2.2),
    )


def curved() -> BuildingSpec:
    """Rectangular block with a semicylindrical bulge carrying windows."""
    return BuildingSpec(
        kind="curved",
        footprint=_rot(np.array([[-6.0, -4.0], [6.0, -4.0], [6.0, 4.0], [-6.0, 4.0]]), 9.0),
        height=10.0,
        floors=3,
        windows={
            1: WindowGrid(rows=3, cols=3, width=1.65, height=1.4),
            2: WindowGrid(rows=3, cols=4, width=1.65, height=1.4),
            3: WindowGrid(rows=3, cols=3, width=1.65, height=1.4),
            4: WindowGrid(rows=3, cols=3, width=1.65, height=1.4),  # arc facade
        },
        roof_thickness=0.3,
        arc_edge=0,
        arc_radius=3.0,
    )


def balcony() -> BuildingSpec:
    """Block with protruding balcony boxes on one facade."""
    return BuildingSpec(
        kind="balcony",
        footprint=_rot(np.array([[-5.0, -3.5], [5.0, -3.5], [5.0, 3.5], [-5.0, 3.5]]), 17.0),
        height=9.0,
        floors=3,
        windows={
            1: WindowGrid(rows=3, cols=3, width=1.6, height=1.3),
            2: WindowGrid(rows=3, cols=4, width=1.6, height=1.3),
            3: WindowGrid(rows=3, cols=3, width=1.6, height=1.3),
        },
        roof_thickness=0.3,
        balconies=(
            BalconySpec(facade=0, offset=1.5, z=3.1, width=2.4, height=0.9, depth=1.1),
            BalconySpec(facade=0, offset=6.1, z=3.1, width=2.4, height=0.9, depth=1.1),
            BalconySpec(facade=0, offset=3.8, z=6.0, width=2.4, height=0.9, depth=1.1),
        ),
    )


def unit_skyscraper() -> BuildingSpec:
    """Meter-scale tower for fast end-to-end training runs."""
    return BuildingSpec(
        kind="skyscraper",
        footprint=np.array([[-0.6, -0.45], [0.6, -0.45], [0.6, 0.45], [-0.6, 0.45]]),
        height=1.6,
        floors=2,
        windows={
            0: WindowGrid(rows=2, cols=2, width=0.22, height=0.26, sill=0.18, lintel=0.15),
            1: WindowGrid(rows=2, cols=2, width=0.22, height=0.26, sill=0.18, lintel=0.15),
            2: WindowGrid(rows=2, cols=2, width=0.22, height=0.26, sill=0.18, lintel=0.15),
            3: WindowGrid(rows=2, cols=2, width=0.22, height=0.26, sill=0.18, lintel=0.15),
        },
        roof_thickness=0.1,
    )


def elongated() -> BuildingSpec:
    """16 x 4 m slab; every facade has the same window density, so per-facade
    ratios match and aggregation differences isolate view-transform error."""
    return BuildingSpec(
        kind="skyscraper",
        footprint=np.array([[-8.0, -2.0], [8.0, -2.0], [8.0, 2.0], [-8.0, 2.0]]),
        height=5.25,
        floors=3,
        windows={
            0: WindowGrid(rows=3, cols=8, width=1.1, height=0.9, sill=0.35, lintel=0.3),
            1: WindowGrid(rows=3, cols=2, width=1.1, height=0.9, sill=0.35, lintel=0.3),
            2: WindowGrid(rows=3, cols=8, width=1.1, height=0.9, sill=0.35, lintel=0.3),
            3: WindowGrid(rows=3, cols=2, width=1.1, height=0.9, sill=0.35, lintel=0.3),
        },
        roof_thickness=0.25,
    )


def unequal_facades() -> BuildingSpec:
    """Same slab but with very different window densities per facade, the
    case where facade-size weighting matters most."""
    return BuildingSpec(
        kind="skyscraper",
        footprint=np.array([[-8.0, -2.0], [8.0, -2.0], [8.0, 2.0], [-8.0, 2.0]]),
        height=5.25,
        floors=3,
        windows={
            0: WindowGrid(rows=3, cols=8, width=1.3, height=1.0, sill=0.35, lintel=0.3),
            1: WindowGrid(rows=1, cols=1, width=0.9, height=0.9, sill=0.35, lintel=0.3),
            2: WindowGrid(rows=3, cols=8, width=1.3, height=1.0, sill=0.35, lintel=0.3),
            3: WindowGrid(rows=1, cols=1, width=0.9, height=0.9, sill=0.35, lintel=0.3),
        },
        roof_thickness=0.25,
    )


PRESETS = {
    "unit_cube": unit_cube,
    "cube_one_window": cube_one_window,
    "skyscraper": skyscraper,
    "l_shaped": l_shaped,
    "curved": curved,
    "balcony": balcony,
    "unit_skyscraper": unit_skyscraper,
    "elongated": elongated,
    "unequal_facades": unequal_facades,
}
