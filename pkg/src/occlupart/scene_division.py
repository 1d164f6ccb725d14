"""Turn a cluster assignment into a scene division: adaptive cluster-count
refinement, per-region convex hulls, and pairwise linear-classifier boundary
half-planes in the ground plane."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBoundaryError, IsolatedNodeError
from .geom2d import convex_hull, hulls_intersect_or_near, point_polygon_distance
from .view_graph import ClusterAssignment, graph_filter, similarity_matrix, spectral_cluster

DIVISION_SCHEMA = "occlupart-division/1"

DEFAULT_INITIAL_K = 10
DEFAULT_SIGMA_C = 0.5
DEFAULT_MIN_CLUSTER_FLOOR = 3
DEFAULT_MAX_RECURSION = 8


@dataclass(frozen=True)
class RefinementConfig:
    initial_K: int = DEFAULT_INITIAL_K
    sigma_c: float = DEFAULT_SIGMA_C
    min_cluster_floor: int = DEFAULT_MIN_CLUSTER_FLOOR
    max_recursion: int = DEFAULT_MAX_RECURSION
    seed: int = 0
    filter_order: int = 5

    def __post_init__(self):
        if not 0.0 < self.sigma_c < 1.0:
            raise ValueError("sigma_c must lie strictly between 0 and 1")
        if self.initial_K < 1 or self.min_cluster_floor < 1 or self.max_recursion < 1:
            raise ValueError("counts must be positive")


@dataclass(frozen=True)
class Region:
    id: int
    camera_ids: frozenset
    # each entry: (neighbor_region_id, unit 2-normal, offset); n·p >= b keeps us
    boundary: tuple
    hull_2d: np.ndarray


@dataclass(frozen=True)
class SceneDivision:
    regions: tuple
    ground_basis: np.ndarray  # (2, 3), rows orthonormal, both ⊥ up_axis
    up_axis: np.ndarray
    assignment: dict
    warning: bool = False
    camera_sets: dict = field(default_factory=dict)  # region id -> RegionCameraSets

    def region(self, region_id):
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(region_id)

    def project(self, points):
        """Project (m, 3) world points onto the ground plane."""
        return np.atleast_2d(points) @ self.ground_basis.T

    def centroids_2d(self):
        return {r.id: r.hull_2d.mean(axis=0) for r in self.regions}


def ground_basis_for(up_axis):
    """Deterministic orthonormal basis of the plane perpendicular to up."""
    up = np.asarray(up_axis, dtype=float)
    up = up / np.linalg.norm(up)
    seed_axis = np.zeros(3)
    seed_axis[int(np.argmin(np.abs(up)))] = 1.0
    b1 = seed_axis - (seed_axis @ up) * up
    b1 = b1 / np.linalg.norm(b1)
    b2 = np.cross(up, b1)
    return np.vstack([b1, b2])


def _counts(labels, k):
    return np.bincount(labels, minlength=k)


def _compact(labels):
    """Renumber labels to 0..K-1 preserving order of first appearance by id."""
    present = np.unique(labels)
    remap = {old: new for new, old in enumerate(present)}
    return np.array([remap[v] for v in labels], dtype=int), len(present)


def _strongest_neighbor_cluster(graph, labels, member, exclude, positions_2d):
    """Cluster (other than `exclude`) with greatest summed edge weight to
    `member`; ties broken by smaller cluster id, no edges by nearest centroid."""
    k = labels.max() + 1
    weights = np.zeros(k)
    for other in range(len(labels)):
        if labels[other] != exclude:
            weights[labels[other]] += graph.adjacency[member, other]
    weights[exclude] = -1.0
    if weights.max() > 0:
        return int(np.argmax(weights))  # argmax takes the smallest id on ties
    best, best_d = None, np.inf
    for c in range(k):
        if c == exclude:
            continue
        mask = labels == c
        if not np.any(mask):
            continue
        d = np.linalg.norm(positions_2d[mask].mean(axis=0) - positions_2d[member])
        if d < best_d:
            best, best_d = c, d
    return best


def refine_clusters(graph, initial, cfg, positions_2d):
    """Recursively split oversized clusters and dissolve undersized or
    hull-covered ones until all counts fall within [M_c ± sigma_c·M_c].

    `positions_2d` are the ground-plane projections of the graph's cameras
    (row-aligned with graph.node_ids); they drive the hull-containment test.

    Returns (assignment, warning): warning is set when max_recursion passes
    elapse without reaching the balanced state.
    """
    labels = initial.labels.copy()
    k = initial.K
    best = (np.inf, labels.copy(), k)

    for _ in range(cfg.max_recursion):
        counts = _counts(labels, k)
        m_c = counts.mean()
        hi = m_c + cfg.sigma_c * m_c

        # (a) split oversized clusters via K=2 graph clustering on the subgraph
        for c in range(k):
            if _counts(labels, labels.max() + 1)[c] <= hi:
                continue
            idx = np.flatnonzero(labels == c)
            sub = graph.induced_subgraph(idx)
            deg = sub.adjacency.sum(axis=1)
            for local in np.flatnonzero(deg <= 0):
                target = _strongest_neighbor_cluster(graph, labels, idx[local], c, positions_2d)
                if target is not None:
                    labels[idx[local]] = target
            idx = np.flatnonzero(labels == c)
            if len(idx) < 2:
                continue
            sub = graph.induced_subgraph(idx)
            if not np.any(sub.adjacency):
                continue
            try:
                filtered = graph_filter(sub, cfg.filter_order)
            except IsolatedNodeError:
                continue
            split = spectral_cluster(similarity_matrix(filtered), 2, seed=cfg.seed)
            new_id = labels.max() + 1
            labels[idx[split.labels == 1]] = new_id
        labels, k = _compact(labels)

        # (b) dissolve undersized or hull-covered clusters
        counts = _counts(labels, k)
        m_c = counts.mean()
        lo = max(cfg.min_cluster_floor, m_c - cfg.sigma_c * m_c)
        hulls = [convex_hull(positions_2d[labels == c]) for c in range(k)]
        for c in range(k):
            if k <= 1:
                break
            count = int(np.sum(labels == c))
            if count == 0:
                continue
            covered = any(
                other != c
                and np.any(labels == other)
                and len(hulls[other]) >= 3
                and all(
                    point_polygon_distance(hulls[other], p) <= 1e-9 for p in positions_2d[labels == c]
                )
                for other in range(k)
            )
            if count >= lo and not covered:
                continue
            for member in np.flatnonzero(labels == c):
                target = _strongest_neighbor_cluster(graph, labels, member, c, positions_2d)
                if target is not None:
                    labels[member] = target
        labels, k = _compact(labels)

        counts = _counts(labels, k)
        m_c = counts.mean()
        violations = int(
            np.sum((counts < m_c - cfg.sigma_c * m_c) | (counts > m_c + cfg.sigma_c * m_c))
        )
        if violations < best[0]:
            best = (violations, labels.copy(), k)
        if violations == 0:
            return ClusterAssignment(labels=labels, K=k), False

    _, labels, k = best
    return ClusterAssignment(labels=labels, K=k), True


def _scene_diameter(positions_2d):
    hull = convex_hull(positions_2d)
    if len(hull) < 2:
        return 0.0
    d = hull[:, None, :] - hull[None, :, :]
    return float(np.sqrt((d**2).sum(axis=2).max()))


def train_linear_boundary(points_a, points_b, reg=1e-2, iterations=2000):
    """Soft-margin linear classifier between two 2D point sets via batch
    subgradient descent on the hinge loss (step 1/(reg·t)).

    Returns (normal, offset) with normal·p >= offset keeping side A.
    Coordinates are standardized internally for conditioning; the returned
    line is expressed in the original frame.
    """
    pts = np.vstack([points_a, points_b])
    y = np.concatenate([np.ones(len(points_a)), -np.ones(len(points_b))])
    center = 0.5 * (points_a.mean(axis=0) + points_b.mean(axis=0))
    scale = pts.std()
    if scale < 1e-12:
        raise DegenerateBoundaryError("all projections identical")
    z = (pts - center) / scale
    w = np.zeros(2)
    c = 0.0
    for t in range(1, iterations + 1):
        margins = y * (z @ w + c)
        viol = margins < 1.0
        grad_w = reg * w
        grad_c = 0.0
        if np.any(viol):
            grad_w = grad_w - (y[viol, None] * z[viol]).mean(axis=0) * (viol.mean())
            grad_c = -(y[viol]).mean() * viol.mean()
        step = 1.0 / (reg * t)
        w = w - step * grad_w
        c = c - step * grad_c
    norm = np.linalg.norm(w)
    if norm < 1e-12:
        raise DegenerateBoundaryError("classifier degenerated to the zero normal")
    # w·(p - center)/scale + c >= 0  =>  (w/scale)·p >= (w/scale)·center - c
    normal = w / norm
    offset = float(normal @ center - c * scale / norm)
    return normal, offset


def compute_boundaries(model, labels, cfg, graph=None):
    """Derive the SceneDivision for a refined assignment: hulls, pairwise
    boundary half-planes between adjacent regions, and the assignment map.

    Regions are adjacent when they share any view-graph edge weight or their
    hulls come within 5% of the scene diameter.
    """
    basis = ground_basis_for(model.up_axis)
    cam_ids = model.camera_ids()
    pos2d = model.positions() @ basis.T
    k = labels.K
    members = [labels.members(c) for c in range(k)]
    hulls = [convex_hull(pos2d[m]) for m in members]
    diameter = _scene_diameter(pos2d)

    inter_weight = np.zeros((k, k))
    if graph is not None:
        lab = labels.labels
        for a in range(k):
            for b in range(a + 1, k):
                wsum = graph.adjacency[np.ix_(members[a], members[b])].sum()
                inter_weight[a, b] = inter_weight[b, a] = wsum

    boundaries = {c: [] for c in range(k)}
    for a in range(k):
        for b in range(a + 1, k):
            adjacent = inter_weight[a, b] > 0 or hulls_intersect_or_near(
                hulls[a], hulls[b], 0.05 * diameter
            )
            if not adjacent:
                continue
            normal, offset = train_linear_boundary(pos2d[members[a]], pos2d[members[b]])
            boundaries[a].append((b, normal, offset))
            boundaries[b].append((a, -normal, -offset))

    regions = tuple(
        Region(
            id=c,
            camera_ids=frozenset(cam_ids[i] for i in members[c]),
            boundary=tuple(boundaries[c]),
            hull_2d=hulls[c],
        )
        for c in range(k)
    )
    assignment = {cam_ids[i]: int(labels.labels[i]) for i in range(len(cam_ids))}
    return SceneDivision(
        regions=regions,
        ground_basis=basis,
        up_axis=np.asarray(model.up_axis, dtype=float),
        assignment=assignment,
    )


def region_violation(region, p2d):
    """Worst half-plane violation of a 2D point against a region (0 inside)."""
    if not region.boundary:
        return 0.0
    return max(0.0, max(b - float(n @ p2d) for _, n, b in region.boundary))


def locate_regions(division, points):
    """Region ids owning each of (m, 3) points; total and deterministic.

    Points are projected to the ground plane; for each, the region with the
    smallest worst-case boundary violation wins, with ties resolved by the
    nearest region centroid, then the smaller region id.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p2d = pts @ division.ground_basis.T
    m = len(p2d)
    centroids = division.centroids_2d()
    best_viol = np.full(m, np.inf)
    best_dist = np.full(m, np.inf)
    best_id = np.full(m, -1, dtype=int)
    for r in division.regions:
        viol = np.zeros(m)
        for _, n, b in r.boundary:
            viol = np.maximum(viol, b - p2d @ n)
        viol = np.maximum(viol, 0.0)
        dist = np.linalg.norm(p2d - centroids[r.id], axis=1)
        better = (viol < best_viol) | (
            (viol == best_viol)
            & ((dist < best_dist) | ((dist == best_dist) & (r.id < best_id)))
        )
        best_viol = np.where(better, viol, best_viol)
        best_dist = np.where(better, dist, best_dist)
        best_id = np.where(better, r.id, best_id)
    return best_id


def locate_region(division, point):
    """Region id owning a single 3D point (see locate_regions)."""
    return int(locate_regions(division, np.asarray(point, dtype=float)[None, :])[0])


# ---------------------------------------------------------------------------
# Serialization

def division_to_json(division):
    data = {
        "schema": DIVISION_SCHEMA,
        "warning": bool(division.warning),
        "up_axis": [float(v) for v in division.up_axis],
        "ground_basis": [[float(v) for v in row] for row in division.ground_basis],
        "assignment": {str(cid): rid for cid, rid in sorted(division.assignment.items())},
        "regions": [
            {
                "id": r.id,
                "camera_ids": sorted(r.camera_ids),
                "boundary": [
                    {
                        "neighbor_id": nb,
                        "nx": float(n[0]),
                        "ny": float(n[1]),
                        "b": float(b),
                    }
                    for nb, n, b in r.boundary
                ],
                "hull": [[float(v) for v in p] for p in r.hull_2d],
            }
            for r in division.regions
        ],
    }
    if division.camera_sets:
        data["camera_sets"] = {
            str(rid): {
                "base": sorted(cs.base),
                "extended": sorted(cs.extended),
                "border": sorted(cs.border),
                "tau_ext": float(cs.tau_ext),
            }
            for rid, cs in sorted(division.camera_sets.items())
        }
    return data


def division_from_json(data):
    from .errors import FormatError

    if data.get("schema") != DIVISION_SCHEMA:
        raise FormatError(f"unexpected division schema: {data.get('schema')}")
    regions = tuple(
        Region(
            id=r["id"],
            camera_ids=frozenset(r["camera_ids"]),
            boundary=tuple(
                (b["neighbor_id"], np.array([b["nx"], b["ny"]]), b["b"]) for b in r["boundary"]
            ),
            hull_2d=np.array(r["hull"], dtype=float).reshape(-1, 2),
        )
        for r in data["regions"]
    )
    division = SceneDivision(
        regions=regions,
        ground_basis=np.array(data["ground_basis"], dtype=float),
        up_axis=np.array(data["up_axis"], dtype=float),
        assignment={int(c): r for c, r in data["assignment"].items()},
        warning=bool(data.get("warning", False)),
    )
    if "camera_sets" in data:
        from .camera_selection import RegionCameraSets

        division.camera_sets.update(
            {
                int(rid): RegionCameraSets(
                    region_id=int(rid),
                    base=frozenset(cs["base"]),
                    extended=frozenset(cs["extended"]),
                    border=frozenset(cs["border"]),
                    tau_ext=cs["tau_ext"],
                )
                for rid, cs in data["camera_sets"].items()
            }
        )
    return division
