"""Exception hierarchy shared across the toolkit."""


class OccluPartError(Exception):
    """Base class for all toolkit errors."""


class FormatError(OccluPartError):
    """Malformed or missing input file content."""


class ConsistencyError(OccluPartError):
    """Cross-referenced entities disagree (e.g. camera observes unknown point)."""


class DegenerateGraphError(OccluPartError):
    """View graph carries no usable structure (no edges / zero similarity)."""


class IsolatedNodeError(OccluPartError):
    """A node has zero degree; the normalized Laplacian is undefined."""

    def __init__(self, node_id):
        super().__init__(f"node {node_id} has zero degree")
        self.node_id = node_id


class ClusteringFailedError(OccluPartError):
    """k-means could not produce the requested number of non-empty clusters."""


class DegenerateBoundaryError(OccluPartError):
    """A region pair cannot be linearly separated (all projections identical)."""


class DegenerateRegionError(OccluPartError):
    """A region has no cameras assigned to it."""


class InteriorCollapsedError(OccluPartError):
    """Shrinking the boundary lines left no interior sub-region."""


class GenerationError(OccluPartError):
    """Synthetic scene generation request cannot be satisfied."""


class OracleSizeError(OccluPartError):
    """Brute-force oracle called beyond its tractable size limit."""
