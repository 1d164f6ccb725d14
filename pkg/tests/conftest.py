"""Shared fixtures: the standard synthetic benchmarks built once per session.

The two-room and campus bundles are the fixtures the acceptance criteria are
stated against; the small bundle is a fast variant for unit and CLI tests.
"""

import numpy as np
import pytest

from occlupart.pipeline import PipelineConfig, divide_scene
from occlupart.region_visibility import ContributionCache, compute_all_masks
from occlupart.synthetic_bench import campus_plan, generate_scene, two_room_plan

TWO_ROOM_SEED = 5
CAMPUS_SEED = 9
SMALL_SEED = 3


class Bundle:
    def __init__(self, **kw):
        self.__dict__.update(kw)


@pytest.fixture(scope="session")
def two_room_bundle():
    """Standard two-room doorway fixture: 60 cameras/room, divided with K=2,
    with the shared contribution cache and all visibility masks."""
    plan = two_room_plan()
    model, scene, truth = generate_scene(
        plan, cams_per_room=60, pts_per_room=120, seed=TWO_ROOM_SEED
    )
    config = PipelineConfig(initial_K=2)
    division, graph, refined = divide_scene(model, config)
    cache = ContributionCache(scene, division.up_axis, render_size=(256, 256))
    mask_set = compute_all_masks(scene, model, division, threshold=0.01, cache=cache)
    return Bundle(
        plan=plan,
        model=model,
        scene=scene,
        truth=truth,
        config=config,
        division=division,
        graph=graph,
        refined=refined,
        cache=cache,
        mask_set=mask_set,
    )


@pytest.fixture(scope="session")
def campus_bundle():
    """Six-room campus fixture (2x3 grid of rooms), 60 cameras/room."""
    plan = campus_plan()
    model, scene, truth = generate_scene(
        plan, cams_per_room=60, pts_per_room=120, seed=CAMPUS_SEED
    )
    return Bundle(plan=plan, model=model, scene=scene, truth=truth)


@pytest.fixture(scope="session")
def small_bundle():
    """Reduced two-room fixture for fast unit tests."""
    plan = two_room_plan()
    model, scene, truth = generate_scene(
        plan, cams_per_room=12, pts_per_room=40, seed=SMALL_SEED, fillers_per_room=30
    )
    config = PipelineConfig(initial_K=2, render_width=64, render_height=64)
    division, graph, refined = divide_scene(model, config)
    return Bundle(
        plan=plan,
        model=model,
        scene=scene,
        truth=truth,
        config=config,
        division=division,
        graph=graph,
        refined=refined,
    )


def random_connected_graph(rng, n):
    """Symmetric non-negative adjacency with positive degree everywhere."""
    a = rng.uniform(0.0, 1.0, size=(n, n))
    a = np.triu(a, 1)
    a[a < 0.55] = 0.0  # sparsify
    perm = rng.permutation(n)
    for i in range(n - 1):  # random spanning chain keeps it connected
        a[min(perm[i], perm[i + 1]), max(perm[i], perm[i + 1])] += rng.uniform(0.2, 1.0)
    a = a + a.T
    np.fill_diagonal(a, 0.0)
    return a
