"""End-to-end divide pipeline and its configuration record."""

from dataclasses import asdict, dataclass

from .camera_selection import DEFAULT_TAU_EXT, select_camera_sets
from .region_visibility import DEFAULT_RENDER_SIZE, DEFAULT_THRESHOLD
from .scene_division import (
    DEFAULT_INITIAL_K,
    DEFAULT_MAX_RECURSION,
    DEFAULT_MIN_CLUSTER_FLOOR,
    DEFAULT_SIGMA_C,
    RefinementConfig,
    compute_boundaries,
    ground_basis_for,
    refine_clusters,
)
from .view_graph import (
    DEFAULT_FILTER_ORDER,
    DEFAULT_PE_FREQUENCIES,
    build_view_graph,
    graph_filter,
    similarity_matrix,
    spectral_cluster,
)


@dataclass(frozen=True)
class PipelineConfig:
    initial_K: int = DEFAULT_INITIAL_K
    sigma_c: float = DEFAULT_SIGMA_C
    min_cluster_floor: int = DEFAULT_MIN_CLUSTER_FLOOR
    max_recursion: int = DEFAULT_MAX_RECURSION
    seed: int = 0
    pe_frequencies: int = DEFAULT_PE_FREQUENCIES
    filter_order: int = DEFAULT_FILTER_ORDER
    tau_ext: float = DEFAULT_TAU_EXT
    threshold: float = DEFAULT_THRESHOLD
    render_width: int = DEFAULT_RENDER_SIZE[0]
    render_height: int = DEFAULT_RENDER_SIZE[1]
    weight_mode: str = "max"

    def refinement(self):
        return RefinementConfig(
            initial_K=self.initial_K,
            sigma_c=self.sigma_c,
            min_cluster_floor=self.min_cluster_floor,
            max_recursion=self.max_recursion,
            seed=self.seed,
            filter_order=self.filter_order,
        )

    def render_size(self):
        return (self.render_width, self.render_height)

    def to_dict(self):
        return asdict(self)


def divide_scene(model, config=PipelineConfig(), with_camera_sets=True):
    """Run the full division pipeline: view graph, filtered-feature spectral
    clustering, refinement, boundary half-planes, and (optionally) per-region
    camera sets. Returns (division, graph, assignment)."""
    graph = build_view_graph(model, config.pe_frequencies)
    filtered = graph_filter(graph, config.filter_order)
    similarity = similarity_matrix(filtered)
    k0 = min(config.initial_K, graph.n)
    initial = spectral_cluster(similarity, k0, seed=config.seed)
    basis = ground_basis_for(model.up_axis)
    pos2d = model.positions() @ basis.T
    cfg = config.refinement()
    if k0 == cfg.initial_K:
        refine_cfg = cfg
    else:
        refine_cfg = RefinementConfig(
            initial_K=k0,
            sigma_c=cfg.sigma_c,
            min_cluster_floor=cfg.min_cluster_floor,
            max_recursion=cfg.max_recursion,
            seed=cfg.seed,
            filter_order=cfg.filter_order,
        )
    refined, warning = refine_clusters(graph, initial, refine_cfg, pos2d)
    division = compute_boundaries(model, refined, refine_cfg, graph=graph)
    if warning:
        object.__setattr__(division, "warning", True)
    if with_camera_sets:
        for region in division.regions:
            division.camera_sets[region.id] = select_camera_sets(
                model, division, region.id, tau_ext=config.tau_ext
            )
    return division, graph, refined
