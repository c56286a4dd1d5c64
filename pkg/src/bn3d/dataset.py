"""Dataset generation and manifest handling.

A dataset directory holds the building spec, closed-form ground truth,
poses, and per-view PPM/PGM/PFM images, all referenced from a manifest that
records a SHA-256 per file. Consumers verify hashes before trusting a
manifest. Generation is deterministic for a fixed (spec, seed, options).

View modes: "orbit" samples accepted poses on a sphere (training data);
"ideal" places one perpendicular view per facade; "multi" places five views
per facade at azimuth offsets of -30/-15/0/+15/+30 degrees. Facade-tagged
modes also emit a per-pixel facade-id map so the 2D baselines can isolate
each facade.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__, imageio
from .camera import CameraPose, Intrinsics, look_at, project, sample_poses
from .errors import Bn3dError, ManifestError
from .render import render_facade_ids, render_ground_truth
from .scene import AnalyticScene, BuildingSpec, build_scene, ground_truth, spec_to_dict
from .train import TrainView

MULTI_VIEW_OFFSETS_DEG = (-30.0, -15.0, 0.0, 15.0, 30.0)
FACADE_NONE = 255
DEFAULT_RADIUS_FACTOR = 2.7


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _facade_frame_distance(facade, intr: Intrinsics, margin: float = 1.05) -> float:
    tan_half = 0.5 * min(intr.width, intr.height) / intr.focal
    extent = max(facade.width, facade.height)
    return margin * 0.5 * extent / tan_half


def _facade_world_corners(facade) -> np.ndarray:
    o = facade.origin
    u = facade.u_axis * facade.width
    v = facade.v_axis * facade.height
    if facade.shape == "arc":
        # frame the chord box of the arc
        o = facade.center - 0.5 * facade.width * facade.u_axis \
            - 0.5 * facade.height * facade.v_axis
        u = facade.u_axis * facade.width
        v = facade.v_axis * facade.height
    return np.stack([o, o + u, o + u + v, o + v])


def facade_poses(scene: AnalyticScene, intr: Intrinsics,
                 mode: str) -> list[tuple[CameraPose, int]]:
    """Deterministic facade-framing poses; (pose, facade_id) pairs."""
    if mode not in ("ideal", "multi"):
        raise Bn3dError(f"unknown facade view mode {mode!r}")
    offsets = (0.0,) if mode == "ideal" else MULTI_VIEW_OFFSETS_DEG
    out = []
    for facade in scene.facades:
        center = facade.center
        corners = _facade_world_corners(facade)
        base_d = _facade_frame_distance(facade, intr)
        for off in offsets:
            th = np.radians(off)
            rot = np.array([
                [np.cos(th), -np.sin(th), 0.0],
                [np.sin(th), np.cos(th), 0.0],
                [0.0, 0.0, 1.0],
            ])
            direction = rot @ facade.outward
            d = base_d
            pose = look_at(center, center + d * direction)
            for _ in range(24):
                px = project(pose, intr, corners)
                lo_ok = np.all(px >= 0.03 * min(intr.width, intr.height))
                hi_ok = np.all(px[:, 0] <= 0.97 * intr.width) and \
                    np.all(px[:, 1] <= 0.97 * intr.height)
                if lo_ok and hi_ok:
                    break
                d *= 1.08
                pose = look_at(center, center + d * direction)
            out.append((pose, facade.facade_id))
    return out


def generate_dataset(spec: BuildingSpec, out_dir, n_views: int, seed: int,
                     image_size: int = 64, facade_views: str | None = None,
                     radius_factor: float = DEFAULT_RADIUS_FACTOR,
                     log=None) -> dict:
    """Build, pose, render, and write a dataset; returns the manifest dict."""
    root = Path(out_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    scene = build_scene(spec)
    gt = ground_truth(spec)
    intr = Intrinsics.square(image_size)

    if facade_views is None:
        poses = [(p, None) for p in sample_poses(
            scene, n_views, radius_factor * scene.bound_radius, seed)]
        mode = "orbit"
    else:
        poses = facade_poses(scene, intr, facade_views)
        mode = facade_views

    views = []
    pose_records = []
    for i, (pose, facade_id) in enumerate(poses):
        img = render_ground_truth(scene, pose, intr)
        stem = f"images/view_{i:03d}"
        imageio.write_ppm(root / f"{stem}.color.ppm", imageio.quantize_rgb(img.rgb))
        imageio.write_pgm(root / f"{stem}.label.pgm", img.label)
        imageio.write_pfm(root / f"{stem}.depth.pfm", img.depth)
        record = {"color": f"{stem}.color.ppm", "label": f"{stem}.label.pgm",
                  "depth": f"{stem}.depth.pfm", "pose_index": i}
        if facade_id is not None:
            fmap = render_facade_ids(scene, pose, intr)
            fmap8 = np.where(fmap < 0, FACADE_NONE, fmap).astype(np.uint8)
            imageio.write_pgm(root / f"{stem}.facade.pgm", fmap8)
            record["facade"] = f"{stem}.facade.pgm"
            record["facade_id"] = int(facade_id)
        views.append(record)
        pose_records.append({
            "position": pose.position.tolist(),
            "rotation": pose.rotation.reshape(-1).tolist(),
            "intrinsics": intr.to_dict(),
            "facade_id": None if facade_id is None else int(facade_id),
        })
        if log is not None and (i + 1) % 10 == 0:
            log(f"rendered {i + 1}/{len(poses)} views")

    from .scene import save_spec

    save_spec(spec, root / "building.json")
    with open(root / "ground_truth.json", "w", encoding="utf-8") as f:
        json.dump(gt.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(root / "poses.json", "w", encoding="utf-8") as f:
        json.dump(pose_records, f, indent=2, sort_keys=True)
        f.write("\n")

    manifest = {
        "format_version": 1,
        "generator_version": __version__,
        "seed": seed,
        "view_mode": mode,
        "image_size": image_size,
        "building_spec": "building.json",
        "ground_truth": "ground_truth.json",
        "poses": "poses.json",
        "intrinsics": intr.to_dict(),
        "bound_center": scene.bound_center.tolist(),
        "bound_radius": scene.bound_radius,
        "building_kind": spec.kind,
        "views": views,
    }
    hashes = {}
    for rel in ["building.json", "ground_truth.json", "poses.json"] + [
            p for v in views for k, p in v.items() if isinstance(p, str)]:
        hashes[rel] = _sha256(root / rel)
    manifest["hashes"] = hashes
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (root / "manifest.json").write_text(text, encoding="utf-8")
    digest = hashlib.sha256(text.encode()).hexdigest()
    (root / "manifest.sha256").write_text(digest + "\n", encoding="utf-8")
    return manifest


def load_manifest(path, verify: bool = True) -> tuple[dict, Path]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    root = path.parent
    if verify:
        for rel, digest in manifest.get("hashes", {}).items():
            target = root / rel
            if not target.is_file():
                raise ManifestError(f"manifest references missing file {rel}")
            actual = _sha256(target)
            if actual != digest:
                raise ManifestError(
                    f"hash mismatch for {rel}: manifest {digest[:12]}.., file {actual[:12]}..")
    return manifest, root


def _pose_from_record(rec: dict) -> tuple[CameraPose, Intrinsics]:
    pose = CameraPose(position=np.array(rec["position"], dtype=float),
                      rotation=np.array(rec["rotation"], dtype=float).reshape(3, 3))
    return pose, Intrinsics.from_dict(rec["intrinsics"])


def load_train_views(manifest: dict, root: Path) -> list[TrainView]:
    with open(root / manifest["poses"], "r", encoding="utf-8") as f:
        pose_records = json.load(f)
    views = []
    for view in manifest["views"]:
        pose, intr = _pose_from_record(pose_records[view["pose_index"]])
        rgb = imageio.dequantize_rgb(imageio.read_ppm(root / view["color"]))
        label = imageio.read_pgm(root / view["label"])
        views.append(TrainView(pose=pose, intrinsics=intr, rgb=rgb, label=label))
    return views


def load_facade_views(manifest: dict, root: Path):
    """Views grouped by facade id, for the 2D baselines."""
    from .baseline2d import FacadeView

    if manifest.get("view_mode") not in ("ideal", "multi"):
        raise ManifestError("dataset was not generated with facade views")
    with open(root / manifest["poses"], "r", encoding="utf-8") as f:
        pose_records = json.load(f)
    grouped: dict[int, list[FacadeView]] = {}
    for view in manifest["views"]:
        pose, intr = _pose_from_record(pose_records[view["pose_index"]])
        label = imageio.read_pgm(root / view["label"])
        depth = imageio.read_pfm(root / view["depth"]).astype(np.float64)
        fmap = imageio.read_pgm(root / view["facade"])
        fid = int(view["facade_id"])
        grouped.setdefault(fid, []).append(FacadeView(
            facade_id=fid,
            label=label,
            depth=depth,
            facade_mask=fmap == fid,
            pose=pose,
            intrinsics=intr,
        ))
    return grouped
