"""Occlusion-agnostic division baselines: uniform grid and k-means on raw
camera positions. Both reuse the boundary-training stage so their outputs are
full SceneDivision artifacts."""

import numpy as np

from .scene_division import compute_boundaries, ground_basis_for
from .view_graph import ClusterAssignment, _kmeans


def grid_assignment(model, rows=3, cols=3):
    """Assign cameras to a rows x cols grid over the ground-plane bounding
    box of camera positions; empty cells are dropped."""
    basis = ground_basis_for(model.up_axis)
    pos = model.positions() @ basis.T
    lo = pos.min(axis=0)
    hi = pos.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    cx = np.minimum((pos[:, 0] - lo[0]) / span[0] * cols, cols - 1e-9).astype(int)
    cy = np.minimum((pos[:, 1] - lo[1]) / span[1] * rows, rows - 1e-9).astype(int)
    raw = cy * cols + cx
    present = np.unique(raw)
    remap = {old: new for new, old in enumerate(present)}
    labels = np.array([remap[v] for v in raw], dtype=int)
    return ClusterAssignment(labels=labels, K=len(present))


def position_kmeans_assignment(model, k, seed=0):
    """Seeded k-means over raw 3D camera positions."""
    pos = model.positions()
    for attempt in range(10):
        rng = np.random.default_rng(seed + attempt)
        labels = _kmeans(pos, k, rng)
        present = np.unique(labels)
        if len(present) == k:
            return ClusterAssignment(labels=labels, K=k)
    remap = {old: new for new, old in enumerate(present)}
    labels = np.array([remap[v] for v in labels], dtype=int)
    return ClusterAssignment(labels=labels, K=len(present))


def division_from_assignment(model, assignment, cfg, graph=None):
    return compute_boundaries(model, assignment, cfg, graph=graph)


def room_assignment_accuracy(labels_by_camera, truth_camera_room):
    """Best-permutation-free accuracy: each cluster votes for its majority
    ground-truth room; a camera is correct when its room matches its
    cluster's majority room."""
    clusters = {}
    for cam_id, label in labels_by_camera.items():
        clusters.setdefault(label, []).append(cam_id)
    correct = 0
    for members in clusters.values():
        rooms = [truth_camera_room[c] for c in members]
        majority = max(set(rooms), key=rooms.count)
        correct += sum(1 for r in rooms if r == majority)
    return correct / len(labels_by_camera)
