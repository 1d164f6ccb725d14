"""Per-region training-camera sets (base / extended / border) and the
primitive-clipping rule used for seamless region merging."""

from dataclasses import dataclass

import numpy as np

from .geom2d import cone_intersects_polygon
from .scene_division import locate_region, locate_regions

DEFAULT_TAU_EXT = 0.1


@dataclass(frozen=True)
class RegionCameraSets:
    region_id: int
    base: frozenset
    extended: frozenset
    border: frozenset
    tau_ext: float

    def __post_init__(self):
        if self.base & self.extended or self.base & self.border or self.extended & self.border:
            raise ValueError("camera sets must be pairwise disjoint")
        if not 0.0 < self.tau_ext < 1.0:
            raise ValueError("tau_ext must lie in (0, 1)")


def _point_regions(model, division):
    """Map point id -> owning region id for every sparse point."""
    pids = sorted(model.points.points)
    if not pids:
        return {}
    positions = np.array([model.points.position(pid) for pid in pids])
    owners = locate_regions(division, positions)
    return dict(zip(pids, (int(o) for o in owners)))


def region_visibility_ratio(model, division, region_id, cam_id, point_regions=None):
    """Fraction of a camera's observed sparse points located inside the
    region (ground-plane point location; regions are prisms along up)."""
    cam = model.camera(cam_id)
    observed = cam.observed_points
    if not observed:
        return 0.0
    if point_regions is None:
        point_regions = _point_regions(model, division)
    inside = sum(1 for pid in observed if point_regions[pid] == region_id)
    return inside / len(observed)


def _faces_region(division, region, cam, fov_margin_deg):
    """True if the camera's FOV-widened optical axis hits the region's hull
    prism (evaluated in the ground plane)."""
    apex = cam.position @ division.ground_basis.T
    direction = cam.forward() @ division.ground_basis.T
    if np.linalg.norm(direction) < 1e-9:
        return False  # looking straight along the up axis
    half = 0.5 * cam.horizontal_fov() + np.deg2rad(fov_margin_deg)
    return cone_intersects_polygon(apex, direction, half, region.hull_2d)


def select_camera_sets(model, division, region_id, tau_ext=DEFAULT_TAU_EXT, fov_margin_deg=0.0):
    """Base cameras are the region's assigned cameras; extended cameras see at
    least tau_ext of their sparse points inside the region; border cameras
    face the region but fall below tau_ext (occluded)."""
    region = division.region(region_id)
    base = frozenset(region.camera_ids)
    extended = set()
    border = set()
    point_regions = _point_regions(model, division)
    for cam in model.cameras:
        if cam.id in base:
            continue
        if region_visibility_ratio(model, division, region_id, cam.id, point_regions) >= tau_ext:
            extended.add(cam.id)
        elif _faces_region(division, region, cam, fov_margin_deg):
            border.add(cam.id)
    return RegionCameraSets(
        region_id=region_id,
        base=base,
        extended=frozenset(extended),
        border=frozenset(border),
        tau_ext=tau_ext,
    )


def clip_primitives_to_region(scene, division, region_id):
    """Sub-scene of Gaussians whose means locate to the region (order kept)."""
    if len(scene) == 0:
        return scene.subset(np.array([], dtype=int))
    keep = np.flatnonzero(locate_regions(division, scene.means) == region_id)
    return scene.subset(keep)


def extended_camera_ratio(model, division, tau_ext=DEFAULT_TAU_EXT):
    """Sum of extended-set sizes over all regions divided by the total camera
    count; smaller means regions are more self-contained."""
    total_ext = sum(
        len(select_camera_sets(model, division, r.id, tau_ext).extended)
        for r in division.regions
    )
    return total_ext / len(model.cameras)
