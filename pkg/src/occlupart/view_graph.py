"""Attributed camera view graph: co-visibility adjacency, positional-encoding
features, low-pass graph filtering and spectral clustering of the resulting
feature-similarity matrix."""

from dataclasses import dataclass

import numpy as np

from .errors import ClusteringFailedError, DegenerateGraphError, IsolatedNodeError
from .sfm_model import covisibility_count

DEFAULT_PE_FREQUENCIES = 10
DEFAULT_FILTER_ORDER = 5


@dataclass(frozen=True)
class ViewGraph:
    node_ids: tuple
    adjacency: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        x = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "node_ids", tuple(self.node_ids))
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "features", x)
        n = len(self.node_ids)
        if a.shape != (n, n):
            raise ValueError("adjacency shape mismatch")
        if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
            raise ValueError("adjacency not symmetric")
        if np.any(np.diag(a) != 0.0):
            raise ValueError("adjacency diagonal must be zero")
        if np.any(a < 0):
            raise ValueError("adjacency weights must be non-negative")
        if x.shape[0] != n:
            raise ValueError("feature row count mismatch")

    @property
    def n(self):
        return len(self.node_ids)

    def induced_subgraph(self, indices):
        idx = np.asarray(indices, dtype=int)
        return ViewGraph(
            node_ids=tuple(self.node_ids[i] for i in idx),
            adjacency=self.adjacency[np.ix_(idx, idx)],
            features=self.features[idx],
        )


@dataclass(frozen=True)
class FilteredFeatures:
    matrix: np.ndarray
    filter_order: int


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    K: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "labels", labels)
        present = np.unique(labels)
        if self.K < 1 or not np.array_equal(present, np.arange(self.K)):
            raise ValueError("labels must cover 0..K-1 with every cluster non-empty")

    def members(self, k):
        return np.flatnonzero(self.labels == k)


def positional_encoding(positions, frequencies):
    """NeRF-style sinusoidal encoding of (m, 3) positions already normalized
    into [-1, 1]^3; output has 6*frequencies columns."""
    positions = np.atleast_2d(positions)
    cols = []
    for l in range(frequencies):
        arg = (2.0**l) * np.pi * positions
        cols.append(np.sin(arg))
        cols.append(np.cos(arg))
    return np.concatenate(cols, axis=1)


def normalize_to_unit_box(positions):
    """Affinely map positions into [-1, 1]^3 by their bounding box."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    span = hi - lo
    span[span < 1e-12] = 1.0
    return 2.0 * (positions - lo) / span - 1.0


def build_view_graph(model, pe_frequencies=DEFAULT_PE_FREQUENCIES):
    """Build the co-visibility-weighted graph over cameras with encoded
    position features."""
    ids = model.camera_ids()
    n = len(ids)
    if n < 2:
        raise ValueError("view graph needs at least 2 cameras")
    adjacency = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w = covisibility_count(model, ids[i], ids[j])
            adjacency[i, j] = adjacency[j, i] = w
    if not np.any(adjacency):
        raise DegenerateGraphError("no co-visibility between any camera pair")
    features = positional_encoding(normalize_to_unit_box(model.positions()), pe_frequencies)
    return ViewGraph(node_ids=ids, adjacency=adjacency, features=features)


def normalized_laplacian(graph):
    """Symmetrically normalized Laplacian I - D^(-1/2) A D^(-1/2)."""
    a = graph.adjacency
    deg = a.sum(axis=1)
    zero = np.flatnonzero(deg <= 0)
    if len(zero):
        raise IsolatedNodeError(graph.node_ids[zero[0]])
    dinv = 1.0 / np.sqrt(deg)
    ls = -a * np.outer(dinv, dinv)
    np.fill_diagonal(ls, 1.0)
    return ls


def graph_filter(graph, r=DEFAULT_FILTER_ORDER):
    """Smooth node features with the low-pass operator (I - L_s/2)^r, applied
    as r repeated multiplications."""
    if r < 1:
        raise ValueError("filter order must be >= 1")
    ls = normalized_laplacian(graph)
    op = np.eye(graph.n) - 0.5 * ls
    x = graph.features.copy()
    for _ in range(r):
        x = op @ x
    return FilteredFeatures(matrix=x, filter_order=r)


def similarity_matrix(filtered):
    """Symmetric non-negative affinity 0.5 * (|H| + |H^T|), H = X Xᵀ."""
    h = filtered.matrix @ filtered.matrix.T
    return 0.5 * (np.abs(h) + np.abs(h.T))


def _kmeans_pp_init(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = points[rng.integers(n)]
        else:
            centers[c] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def _kmeans(points, k, rng, max_iter=300, tol=1e-6):
    centers = _kmeans_pp_init(points, k, rng)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            mask = labels == c
            if np.any(mask):
                new_centers[c] = points[mask].mean(axis=0)
        shift = np.max(np.linalg.norm(new_centers - centers, axis=1))
        centers = new_centers
        if shift < tol:
            break
    return labels


def _ncut_value(w, labels):
    a = labels == labels.min()
    cut = w[np.ix_(np.flatnonzero(a), np.flatnonzero(~a))].sum()
    vol_a = w[a].sum()
    vol_b = w[~a].sum()
    if vol_a <= 0 or vol_b <= 0:
        return np.inf
    return cut * (1.0 / vol_a + 1.0 / vol_b)


def _sweep_cut(w, dinv, m):
    """Best threshold cut along the second generalized eigenvector
    (Shi-Malik); used to refine two-way splits."""
    eigvals, eigvecs = np.linalg.eigh(m)
    v = eigvecs[:, np.argsort(eigvals)[::-1][1]] * dinv
    order = np.argsort(v)
    n = len(order)
    best_labels, best_val = None, np.inf
    for i in range(1, n):
        labels = np.zeros(n, dtype=int)
        labels[order[:i]] = 1
        val = _ncut_value(w, labels)
        if val < best_val:
            best_val = val
            best_labels = labels
    return best_labels, best_val


def spectral_cluster(similarity, K, seed=0):
    """Cluster rows of a symmetric non-negative similarity matrix.

    Embeds nodes with the K leading eigenvectors of the symmetrically
    degree-normalized similarity, unit-normalizes the rows, and runs seeded
    k-means. Restarts with the next seed (up to 10 times) if a cluster comes
    out empty. Two-way splits are additionally checked against the spectral
    sweep cut and the lower-normalized-cut labeling wins.
    """
    w = np.asarray(similarity, dtype=float)
    n = w.shape[0]
    if not 1 <= K <= n:
        raise ValueError("K must be in [1, n]")
    if not np.any(w):
        raise DegenerateGraphError("similarity matrix is identically zero")
    if K == 1:
        return ClusterAssignment(labels=np.zeros(n, dtype=int), K=1)
    deg = w.sum(axis=1)
    dinv = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    m = w * np.outer(dinv, dinv)
    m = 0.5 * (m + m.T)
    eigvals, eigvecs = np.linalg.eigh(m)
    embed = eigvecs[:, np.argsort(eigvals)[::-1][:K]]
    norms = np.linalg.norm(embed, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    embed = embed / norms

    for attempt in range(10):
        rng = np.random.default_rng(seed + attempt)
        labels = _kmeans(embed, K, rng)
        if len(np.unique(labels)) == K:
            if K == 2:
                sweep_labels, sweep_val = _sweep_cut(w, dinv, m)
                if sweep_labels is not None and sweep_val < _ncut_value(w, labels):
                    labels = sweep_labels
            return ClusterAssignment(labels=labels, K=K)
    raise ClusteringFailedError(f"could not fill {K} clusters after 10 restarts")
