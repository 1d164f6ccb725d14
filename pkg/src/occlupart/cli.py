"""Command-line surface: gen / divide / masks / render / baselines.

Every JSON artifact embeds the resolved pipeline configuration and the
SHA-256 of its inputs so reruns are auditable and byte-identical.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    division_from_assignment,
    grid_assignment,
    position_kmeans_assignment,
    room_assignment_accuracy,
)
from .camera_selection import extended_camera_ratio
from .errors import (
    ClusteringFailedError,
    ConsistencyError,
    DegenerateBoundaryError,
    DegenerateGraphError,
    DegenerateRegionError,
    FormatError,
    InteriorCollapsedError,
    IsolatedNodeError,
    OccluPartError,
)
from .pipeline import PipelineConfig, divide_scene
from .region_visibility import compute_all_masks, load_masks, render_culled, save_masks
from .rotations import axis_angle_quat, look_rotation, quat_multiply
from .scene_division import division_from_json, division_to_json
from .sfm_model import (
    Camera,
    load_colmap_text,
    load_scene_json,
    save_colmap_text,
    save_scene_json,
)
from .splat_scene import load_ply, rasterize, save_ply
from .synthetic_bench import (
    campus_plan,
    generate_scene,
    load_plan,
    plan_from_json,
    save_plan,
    two_room_plan,
)
from .viz import save_comparison_panel, save_division_map

EXIT_FORMAT = 2
EXIT_DEGENERATE = 3
EXIT_CLUSTERING = 4


def _sha256_path(path):
    path = Path(path)
    if path.is_dir():
        digest = hashlib.sha256()
        for child in sorted(p for p in path.rglob("*") if p.is_file()):
            digest.update(child.name.encode())
            digest.update(child.read_bytes())
        return digest.hexdigest()
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _provenance(config, inputs):
    return {
        "tool": f"occlupart/{__version__}",
        "config": config.to_dict(),
        "input_hashes": {str(name): _sha256_path(p) for name, p in inputs.items()},
    }


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _write_png(path, image):
    from PIL import Image

    arr = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def _config_from_args(args):
    kwargs = {}
    for attr in (
        "initial_K",
        "sigma_c",
        "min_cluster_floor",
        "max_recursion",
        "seed",
        "pe_frequencies",
        "filter_order",
        "tau_ext",
        "threshold",
        "weight_mode",
    ):
        value = getattr(args, attr, None)
        if value is not None:
            kwargs[attr] = value
    if getattr(args, "render_size", None):
        w, h = (int(v) for v in args.render_size.lower().split("x"))
        kwargs["render_width"] = w
        kwargs["render_height"] = h
    return PipelineConfig(**kwargs)


def _up_axis_from_flag(flag):
    if flag is None:
        return None
    axes = {"x": [1.0, 0, 0], "y": [0, 1.0, 0], "z": [0, 0, 1.0]}
    if flag not in axes:
        raise FormatError(f"unknown up axis: {flag}")
    return np.array(axes[flag])


def _load_model(path, up_flag=None):
    path = Path(path)
    if path.is_dir():
        return load_colmap_text(path, up_axis=_up_axis_from_flag(up_flag))
    data = json.loads(path.read_text())
    schema = data.get("schema", "")
    if schema == "occlupart-plan/1":
        plan = plan_from_json(data)
        model, _, _ = generate_scene(plan, cams_per_room=60, pts_per_room=120)
        return model
    return load_scene_json(path)


def _add_config_flags(p):
    p.add_argument("--initial-k", dest="initial_K", type=int)
    p.add_argument("--sigma-c", dest="sigma_c", type=float)
    p.add_argument("--min-cluster-floor", dest="min_cluster_floor", type=int)
    p.add_argument("--max-recursion", dest="max_recursion", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--pe-frequencies", dest="pe_frequencies", type=int)
    p.add_argument("--filter-order", dest="filter_order", type=int)
    p.add_argument("--tau-ext", dest="tau_ext", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--render-size", dest="render_size", help="WxH, e.g. 256x256")
    p.add_argument("--weight-mode", dest="weight_mode", choices=["max", "sum"])
    p.add_argument("--up-axis", dest="up_axis", choices=["x", "y", "z"])


def cmd_gen(args):
    if args.fixture == "two-room":
        plan = two_room_plan(seed=args.seed if args.seed is not None else 7)
    elif args.fixture == "campus":
        plan = campus_plan(seed=args.seed if args.seed is not None else 11)
    else:
        plan = load_plan(args.plan)
        if args.seed is not None:
            plan = plan_from_json({**_plan_json_with_seed(plan, args.seed)})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, scene, truth = generate_scene(
        plan,
        cams_per_room=args.cams_per_room,
        pts_per_room=args.pts_per_room,
        fillers_per_room=args.fillers_per_room,
    )
    save_plan(plan, out / "plan.json")
    save_scene_json(model, out / "scene.json")
    save_colmap_text(model, out / "colmap")
    save_ply(scene, out / "scene.ply")
    _write_json(
        out / "truth.json",
        {
            "camera_room": {str(k): v for k, v in truth.camera_room.items()},
            "point_room": {str(k): v for k, v in truth.point_room.items()},
            "gaussian_room": {str(k): v for k, v in truth.gaussian_room.items()},
        },
    )
    print(f"wrote fixture with {len(model.cameras)} cameras, {len(scene)} gaussians to {out}")
    return 0


def _plan_json_with_seed(plan, seed):
    from .synthetic_bench import plan_to_json

    data = plan_to_json(plan)
    data["seed"] = seed
    return data


def cmd_divide(args):
    config = _config_from_args(args)
    model = _load_model(args.input, args.up_axis)
    division, graph, _ = divide_scene(model, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = division_to_json(division)
    data["provenance"] = _provenance(config, {"input": args.input})
    _write_json(out / "division.json", data)
    save_division_map(division, model, out / "division.svg")
    if args.dump_debug:
        from .view_graph import graph_filter, similarity_matrix

        sim = similarity_matrix(graph_filter(graph, config.filter_order))
        np.savetxt(out / "similarity.csv", sim, delimiter=",")
    print(f"wrote {len(division.regions)} regions to {out / 'division.json'}")
    return 0


def cmd_masks(args):
    config = _config_from_args(args)
    model = _load_model(args.model, args.up_axis)
    division = division_from_json(json.loads(Path(args.division).read_text()))
    scene = load_ply(args.scene)
    known = set(model.camera_ids())
    for cid in division.assignment:
        if cid not in known:
            raise FormatError(f"division references camera {cid} absent from the model")
    mask_set = compute_all_masks(
        scene,
        model,
        division,
        threshold=config.threshold,
        render_size=config.render_size(),
        weight_mode=config.weight_mode,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_masks(mask_set, out / "masks.bin")
    rows = [
        {
            "region_id": m.region_id,
            "sub_region": m.sub_region,
            "visible": m.count(),
            "reduction_ratio": 1.0 - m.count() / max(1, len(scene)),
        }
        for m in mask_set.masks
    ]
    report = {
        "schema": "occlupart-mask-report/1",
        "num_gaussians": len(scene),
        "masks": rows,
        "provenance": _provenance(
            config, {"scene": args.scene, "division": args.division, "model": args.model}
        ),
    }
    _write_json(out / "report.json", report)
    with open(out / "report.csv", "w") as f:
        f.write("region_id,sub_region,visible,reduction_ratio\n")
        for r in rows:
            f.write(
                f"{r['region_id']},{r['sub_region']},{r['visible']},{r['reduction_ratio']!r}\n"
            )
    print(f"wrote {len(mask_set.masks)} masks to {out / 'masks.bin'}")
    return 0


def _parse_camera_spec(args, model, division):
    if args.camera_id is not None:
        return model.camera(args.camera_id)
    try:
        x, y, z, yaw_deg = (float(v) for v in args.camera.split(","))
    except (AttributeError, ValueError):
        raise FormatError("camera spec must be 'x,y,z,yaw_deg' or --camera-id")
    up = division.up_axis
    b1 = division.ground_basis[0]
    forward = quat_multiply(
        axis_angle_quat(up, np.deg2rad(yaw_deg)), np.concatenate([[0.0], b1])
    )[1:]
    return Camera(
        id=-1,
        position=np.array([x, y, z]),
        rotation=look_rotation(forward, up),
        focal=180.0,
        principal_point=np.array([128.0, 128.0]),
        image_size=(256, 256),
    )


def cmd_render(args):
    config = _config_from_args(args)
    division = division_from_json(json.loads(Path(args.division).read_text()))
    scene = load_ply(args.scene)
    mask_set = load_masks(args.masks)
    model = _load_model(args.model, args.up_axis) if args.model else None
    cam = _parse_camera_spec(args, model, division)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    size = config.render_size()
    culled = render_culled(scene, division, mask_set, cam, render_size=size)
    _write_png(out / "culled.png", culled.image)
    stats = {
        "schema": "occlupart-render-report/1",
        "region_id": culled.region_id,
        "sub_region": culled.sub_region,
        "rendered_count": culled.rendered_count,
        "culled_count": culled.culled_count,
        "culled_ratio": culled.culled_count / max(1, len(scene)),
    }
    if args.compare_full:
        full = rasterize(scene, cam, size[0], size[1])
        _write_png(out / "full.png", full.image)
        diff = np.abs(full.image - culled.image)
        stats["max_abs_diff"] = float(diff.max(initial=0.0))
        stats["mean_abs_diff"] = float(diff.mean()) if diff.size else 0.0
    inputs = {"scene": args.scene, "division": args.division, "masks": args.masks}
    if args.model:
        inputs["model"] = args.model
    stats["provenance"] = _provenance(config, inputs)
    _write_json(out / "render_stats.json", stats)
    print(f"rendered {culled.rendered_count}/{len(scene)} gaussians (region {culled.region_id})")
    return 0


def cmd_baselines(args):
    config = _config_from_args(args)
    model = _load_model(args.input, args.up_axis)
    division, graph, refined = divide_scene(model, config, with_camera_sets=False)
    cfg = config.refinement()
    methods = {"occlusion-aware": division}
    grid = grid_assignment(model)
    methods["grid-3x3"] = division_from_assignment(model, grid, cfg, graph=graph)
    kmeans = position_kmeans_assignment(model, k=refined.K, seed=config.seed)
    methods["position-kmeans"] = division_from_assignment(model, kmeans, cfg, graph=graph)

    truth = None
    if args.truth:
        raw = json.loads(Path(args.truth).read_text())
        truth = {int(k): v for k, v in raw["camera_room"].items()}

    rows = []
    for name, div in methods.items():
        row = {
            "method": name,
            "num_regions": len(div.regions),
            "extended_ratio": extended_camera_ratio(model, div, tau_ext=config.tau_ext),
        }
        if truth is not None:
            row["room_accuracy"] = room_assignment_accuracy(div.assignment, truth)
        rows.append(row)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"input": args.input}
    if args.truth:
        inputs["truth"] = args.truth
    report = {
        "schema": "occlupart-baselines/1",
        "methods": rows,
        "provenance": _provenance(config, inputs),
    }
    _write_json(out / "comparison.json", report)
    cols = ["method", "num_regions", "extended_ratio"] + (
        ["room_accuracy"] if truth is not None else []
    )
    with open(out / "comparison.csv", "w") as f:
        f.write(",".join(cols) + "\n")
        for r in rows:
            f.write(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n")
    save_comparison_panel(methods, model, out / "comparison.svg")
    for r in rows:
        print(json.dumps(r, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="occlupart")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic ground-truth fixture")
    p.add_argument("--plan", help="floor plan JSON (occlupart-plan/1)")
    p.add_argument("--fixture", choices=["two-room", "campus"])
    p.add_argument("--cams-per-room", dest="cams_per_room", type=int, default=60)
    p.add_argument("--pts-per-room", dest="pts_per_room", type=int, default=120)
    p.add_argument("--fillers-per-room", dest="fillers_per_room", type=int, default=150)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("divide", help="run the occlusion-aware division pipeline")
    p.add_argument("input", help="COLMAP text dir, scene JSON, or plan JSON")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--dump-debug", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_divide)

    p = sub.add_parser("masks", help="compute region visibility masks")
    p.add_argument("--scene", required=True, help="gaussian scene PLY")
    p.add_argument("--division", required=True, help="division JSON")
    p.add_argument("--model", required=True, help="scene JSON or COLMAP dir")
    p.add_argument("-o", "--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_masks)

    p = sub.add_parser("render", help="render a viewpoint with region culling")
    p.add_argument("--scene", required=True)
    p.add_argument("--division", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--model")
    p.add_argument("--camera", help="'x,y,z,yaw_deg'")
    p.add_argument("--camera-id", dest="camera_id", type=int)
    p.add_argument("--compare-full", dest="compare_full", action="store_true")
    p.add_argument("-o", "--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("baselines", help="compare against grid and k-means divisions")
    p.add_argument("input")
    p.add_argument("--truth", help="ground-truth JSON from gen")
    p.add_argument("-o", "--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_baselines)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ConsistencyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (
        DegenerateGraphError,
        DegenerateBoundaryError,
        DegenerateRegionError,
        IsolatedNodeError,
        InteriorCollapsedError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ClusteringFailedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CLUSTERING
    except OccluPartError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
