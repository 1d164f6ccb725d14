"""Per-region and per-sub-region visibility masks, region subdivision, and
rendering with region-based culling."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegionError, FormatError, InteriorCollapsedError
from .geom2d import clip_halfplane, point_in_convex, point_polygon_distance, polygon_area
from .scene_division import locate_region
from .splat_scene import backside_camera, rasterize

MASK_SCHEMA = "occlupart-mask/1"

DEFAULT_THRESHOLD = 0.01
DEFAULT_RENDER_SIZE = (256, 256)
SHRINK_FACTOR = 0.1

WHOLE = "whole"
INTERIOR = "interior"


def border_tag(neighbor_id):
    return f"border:{neighbor_id}"


@dataclass(frozen=True)
class VisibilityMask:
    region_id: int
    sub_region: str  # "whole", "interior", or "border:<neighbor id>"
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))

    def count(self):
        return int(self.bits.sum())


@dataclass(frozen=True)
class SubdividedRegion:
    region_id: int
    interior_polygon: np.ndarray
    border_strips: tuple  # (neighbor_id, polygon)
    d_max: float


@dataclass
class MaskSet:
    """All masks of a scene plus the subdivision geometry needed to pick the
    right mask for a viewpoint."""

    num_gaussians: int
    masks: list
    subdivisions: dict = field(default_factory=dict)  # region id -> SubdividedRegion|None

    def find(self, region_id, sub_region):
        for m in self.masks:
            if m.region_id == region_id and m.sub_region == sub_region:
                return m
        return None


class ContributionCache:
    """Memoizes each camera's per-Gaussian contribution weights (max of the
    original and backside views) so different camera subsets and thresholds
    can share renders."""

    def __init__(self, scene, up_axis, render_size=DEFAULT_RENDER_SIZE, weight_mode="max"):
        self.scene = scene
        self.up_axis = up_axis
        self.render_size = render_size
        self.weight_mode = weight_mode
        self._weights = {}

    def weights(self, cam):
        cached = self._weights.get(cam.id)
        if cached is None:
            w, h = self.render_size
            front = rasterize(self.scene, cam, w, h, weight_mode=self.weight_mode)
            back = rasterize(
                self.scene, backside_camera(cam, self.up_axis), w, h, weight_mode=self.weight_mode
            )
            cached = np.maximum(front.max_weight, back.max_weight)
            self._weights[cam.id] = cached
        return cached


def _bits_for_cameras(cache, cameras, threshold):
    bits = np.zeros(len(cache.scene), dtype=bool)
    for cam in cameras:
        bits |= cache.weights(cam) > threshold
    return bits


def compute_region_mask(
    scene,
    model,
    division,
    region_id,
    threshold=DEFAULT_THRESHOLD,
    render_size=DEFAULT_RENDER_SIZE,
    cache=None,
    weight_mode="max",
):
    """Whole-region visibility mask: a Gaussian's bit is set when its maximum
    contribution weight exceeds `threshold` in the original or backside render
    of any camera assigned to the region."""
    region = division.region(region_id)
    if not region.camera_ids:
        raise DegenerateRegionError(f"region {region_id} has no cameras")
    if cache is None:
        cache = ContributionCache(scene, division.up_axis, render_size, weight_mode)
    cams = [model.camera(cid) for cid in sorted(region.camera_ids)]
    bits = _bits_for_cameras(cache, cams, threshold)
    return VisibilityMask(region_id=region_id, sub_region=WHOLE, bits=bits)


def subdivide_region(division, model, region_id):
    """Split a region into border strips of width 0.1*d_max along each
    boundary line plus the remaining interior polygon."""
    region = division.region(region_id)
    if len(region.camera_ids) < 2:
        raise ValueError(f"region {region_id} needs at least 2 cameras")
    if not region.boundary:
        raise ValueError(f"region {region_id} has no boundaries")
    positions = np.array([model.camera(cid).position for cid in sorted(region.camera_ids)])
    diffs = positions[:, None, :] - positions[None, :, :]
    d_max = float(np.sqrt((diffs**2).sum(axis=2).max()))
    shift = SHRINK_FACTOR * d_max

    poly = region.hull_2d
    strips = []
    interior = poly
    for nb, n, b in region.boundary:
        strip = clip_halfplane(poly, n, b)
        strip = clip_halfplane(strip, -n, -(b + shift))
        strips.append((nb, strip))
        interior = clip_halfplane(interior, n, b + shift)
    if len(interior) < 3 or abs(polygon_area(interior)) < 1e-12:
        raise InteriorCollapsedError(
            f"region {region_id}: interior vanished after shrinking by {shift:g}"
        )
    return SubdividedRegion(
        region_id=region_id,
        interior_polygon=interior,
        border_strips=tuple(strips),
        d_max=d_max,
    )


def _attribute_camera(sub, p2d):
    """Sub-region tag owning a projected camera position (containment first,
    nearest polygon as fallback)."""
    if point_in_convex(sub.interior_polygon, p2d, eps=1e-9):
        return INTERIOR
    for nb, strip in sub.border_strips:
        if len(strip) >= 3 and point_in_convex(strip, p2d, eps=1e-9):
            return border_tag(nb)
    best_tag = INTERIOR
    best_d = point_polygon_distance(sub.interior_polygon, p2d)
    for nb, strip in sub.border_strips:
        d = point_polygon_distance(strip, p2d)
        if d < best_d:
            best_d = d
            best_tag = border_tag(nb)
    return best_tag


def compute_subregion_masks(
    scene,
    model,
    division,
    region_id,
    threshold=DEFAULT_THRESHOLD,
    render_size=DEFAULT_RENDER_SIZE,
    cache=None,
    weight_mode="max",
):
    """One mask per sub-region, from the same per-camera renders as the whole
    region mask. A sub-region that receives no cameras inherits the union of
    its neighbors' masks (interior and strips are mutually adjacent)."""
    sub = subdivide_region(division, model, region_id)
    region = division.region(region_id)
    if cache is None:
        cache = ContributionCache(scene, division.up_axis, render_size, weight_mode)

    tags = [INTERIOR] + [border_tag(nb) for nb, _ in sub.border_strips]
    cams_by_tag = {t: [] for t in tags}
    for cid in sorted(region.camera_ids):
        cam = model.camera(cid)
        p2d = cam.position @ division.ground_basis.T
        cams_by_tag[_attribute_camera(sub, p2d)].append(cam)

    bits_by_tag = {
        t: _bits_for_cameras(cache, cams, threshold) if cams else None
        for t, cams in cams_by_tag.items()
    }
    populated = [b for b in bits_by_tag.values() if b is not None]
    union_all = np.zeros(len(scene), dtype=bool)
    for b in populated:
        union_all |= b
    for t in tags:
        if bits_by_tag[t] is None:
            if t == INTERIOR:
                bits_by_tag[t] = union_all.copy()
            else:
                # empty strip: adjacent sub-region is the interior
                bits_by_tag[t] = (
                    bits_by_tag[INTERIOR].copy()
                    if bits_by_tag[INTERIOR] is not None
                    else union_all.copy()
                )
    return sub, [
        VisibilityMask(region_id=region_id, sub_region=t, bits=bits_by_tag[t]) for t in tags
    ]


def compute_all_masks(
    scene,
    model,
    division,
    threshold=DEFAULT_THRESHOLD,
    render_size=DEFAULT_RENDER_SIZE,
    weight_mode="max",
    cache=None,
):
    """Whole-region masks for every region plus sub-region masks where the
    region can be subdivided (falls back to the whole mask otherwise)."""
    if cache is None:
        cache = ContributionCache(scene, division.up_axis, render_size, weight_mode)
    mask_set = MaskSet(num_gaussians=len(scene), masks=[])
    for region in division.regions:
        mask_set.masks.append(
            compute_region_mask(
                scene, model, division, region.id, threshold, render_size, cache, weight_mode
            )
        )
        try:
            sub, masks = compute_subregion_masks(
                scene, model, division, region.id, threshold, render_size, cache, weight_mode
            )
            mask_set.subdivisions[region.id] = sub
            mask_set.masks.extend(masks)
        except (InteriorCollapsedError, ValueError):
            mask_set.subdivisions[region.id] = None
    return mask_set


@dataclass
class CulledRenderResult:
    image: np.ndarray
    region_id: int
    sub_region: str
    rendered_count: int
    culled_count: int


def render_culled(scene, division, mask_set, cam, render_size=DEFAULT_RENDER_SIZE):
    """Render a viewpoint through the mask of its (sub-)region; falls back
    from sub-region to whole-region mask to the full scene."""
    w, h = render_size
    rid = locate_region(division, cam.position)
    sub = mask_set.subdivisions.get(rid)
    mask = None
    tag = WHOLE
    if sub is not None:
        p2d = cam.position @ division.ground_basis.T
        tag = _attribute_camera(sub, p2d)
        mask = mask_set.find(rid, tag)
    if mask is None:
        tag = WHOLE
        mask = mask_set.find(rid, WHOLE)
    if mask is None:
        result = rasterize(scene, cam, w, h)
        return CulledRenderResult(
            image=result.image,
            region_id=rid,
            sub_region="full-scene",
            rendered_count=len(scene),
            culled_count=0,
        )
    keep = np.flatnonzero(mask.bits)
    result = rasterize(scene.subset(keep), cam, w, h)
    return CulledRenderResult(
        image=result.image,
        region_id=rid,
        sub_region=tag,
        rendered_count=len(keep),
        culled_count=len(scene) - len(keep),
    )


# ---------------------------------------------------------------------------
# Mask file ("occlupart-mask/1"): one JSON header line, then packed bitsets.

def _poly_json(poly):
    return [[float(v) for v in p] for p in poly]


def save_masks(mask_set, path):
    entries = []
    payload = b""
    offset = 0
    for m in mask_set.masks:
        packed = np.packbits(m.bits).tobytes()
        entries.append(
            {
                "region_id": m.region_id,
                "sub_region": m.sub_region,
                "offset": offset,
                "nbytes": len(packed),
            }
        )
        payload += packed
        offset += len(packed)
    subdivisions = {}
    for rid, sub in mask_set.subdivisions.items():
        if sub is None:
            subdivisions[str(rid)] = None
        else:
            subdivisions[str(rid)] = {
                "interior": _poly_json(sub.interior_polygon),
                "strips": [
                    {"neighbor_id": nb, "polygon": _poly_json(poly)}
                    for nb, poly in sub.border_strips
                ],
                "d_max": float(sub.d_max),
            }
    header = {
        "schema": MASK_SCHEMA,
        "num_gaussians": mask_set.num_gaussians,
        "masks": entries,
        "subdivisions": subdivisions,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(payload)


def load_masks(path):
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise FormatError("invalid mask file header")
        if header.get("schema") != MASK_SCHEMA:
            raise FormatError(f"unexpected mask schema: {header.get('schema')}")
        payload = f.read()
    n = header["num_gaussians"]
    masks = []
    for e in header["masks"]:
        packed = np.frombuffer(payload[e["offset"] : e["offset"] + e["nbytes"]], dtype=np.uint8)
        bits = np.unpackbits(packed)[:n].astype(bool)
        masks.append(VisibilityMask(region_id=e["region_id"], sub_region=e["sub_region"], bits=bits))
    subdivisions = {}
    for rid, sub in header.get("subdivisions", {}).items():
        if sub is None:
            subdivisions[int(rid)] = None
        else:
            subdivisions[int(rid)] = SubdividedRegion(
                region_id=int(rid),
                interior_polygon=np.array(sub["interior"], dtype=float).reshape(-1, 2),
                border_strips=tuple(
                    (s["neighbor_id"], np.array(s["polygon"], dtype=float).reshape(-1, 2))
                    for s in sub["strips"]
                ),
                d_max=sub["d_max"],
            )
    return MaskSet(num_gaussians=n, masks=masks, subdivisions=subdivisions)
