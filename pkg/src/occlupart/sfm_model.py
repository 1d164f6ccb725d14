"""Posed-camera / sparse-point data model with COLMAP-text and native JSON I/O."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, FormatError
from .rotations import quat_conjugate, quat_normalize, quat_to_rotmat

SCENE_SCHEMA = "occlupart-scene/1"

_SUPPORTED_MODELS = ("PINHOLE", "SIMPLE_PINHOLE")


@dataclass(frozen=True)
class Camera:
    """A posed pinhole camera. `rotation` is the world-from-camera unit
    quaternion (w, x, y, z); the camera looks along its +z axis."""

    id: int
    position: np.ndarray
    rotation: np.ndarray
    focal: float
    principal_point: np.ndarray
    image_size: tuple
    observed_points: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(
            self, "principal_point", np.asarray(self.principal_point, dtype=float)
        )
        object.__setattr__(self, "observed_points", frozenset(self.observed_points))
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-9:
            raise ValueError(f"camera {self.id}: rotation not unit norm")
        if not self.focal > 0:
            raise ValueError(f"camera {self.id}: focal must be positive")
        if not (self.image_size[0] > 0 and self.image_size[1] > 0):
            raise ValueError(f"camera {self.id}: image size must be positive")

    def rotation_matrix(self):
        return quat_to_rotmat(self.rotation)

    def forward(self):
        """World-space viewing direction (+z of the camera frame)."""
        return self.rotation_matrix() @ np.array([0.0, 0.0, 1.0])

    def world_to_camera(self, pts):
        """Map (m, 3) world points into the camera frame."""
        r = self.rotation_matrix()
        return (np.atleast_2d(pts) - self.position) @ r

    def horizontal_fov(self):
        return 2.0 * np.arctan(self.image_size[0] / (2.0 * self.focal))


@dataclass(frozen=True)
class SparsePointSet:
    """Triangulated sparse points: id -> (xyz, set of observing camera ids)."""

    points: dict

    def position(self, pid):
        return self.points[pid][0]

    def observing_cameras(self, pid):
        return self.points[pid][1]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class SceneModel:
    cameras: tuple
    points: SparsePointSet
    up_axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "up_axis", np.asarray(self.up_axis, dtype=float))
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate camera ids")
        if len(ids) < 1:
            raise ValueError("scene needs at least one camera")
        if abs(np.linalg.norm(self.up_axis) - 1.0) > 1e-9:
            raise ValueError("up_axis must be unit norm")
        object.__setattr__(self, "_by_id", {c.id: c for c in self.cameras})

    def camera(self, cam_id):
        return self._by_id[cam_id]

    def camera_ids(self):
        return [c.id for c in self.cameras]

    def positions(self):
        return np.array([c.position for c in self.cameras])

    def validate_observations(self):
        """Raise ConsistencyError unless observation symmetry holds."""
        for c in self.cameras:
            for pid in c.observed_points:
                if pid not in self.points.points:
                    raise ConsistencyError(f"camera {c.id} observes unknown point {pid}")
                if c.id not in self.points.observing_cameras(pid):
                    raise ConsistencyError(f"point {pid} does not list camera {c.id}")
        for pid, (_, obs) in self.points.points.items():
            for cid in obs:
                if cid not in self._by_id:
                    raise ConsistencyError(f"point {pid} lists unknown camera {cid}")
                if pid not in self._by_id[cid].observed_points:
                    raise ConsistencyError(f"camera {cid} does not list point {pid}")


def covisibility_count(model, i, j):
    """Number of sparse points observed by both cameras i and j."""
    a = model.camera(i).observed_points
    b = model.camera(j).observed_points
    return len(a & b)


def default_up_axis(positions):
    """World coordinate axis of least camera-position variance."""
    positions = np.atleast_2d(positions)
    var = positions.var(axis=0)
    axis = np.zeros(3)
    axis[int(np.argmin(var))] = 1.0
    return axis


def _tokenized_lines(path):
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise FormatError(f"missing file: {path}")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def load_colmap_text(path, up_axis=None):
    """Load a COLMAP text-format sparse reconstruction directory.

    Only PINHOLE and SIMPLE_PINHOLE camera models are accepted. Camera world
    positions are recovered as -R^T t from the stored camera-from-world pose.
    """
    path = Path(path)
    intrinsics = {}
    for lineno, tok in _tokenized_lines(path / "cameras.txt"):
        try:
            cam_id, model = int(tok[0]), tok[1]
            width, height = int(tok[2]), int(tok[3])
            params = [float(v) for v in tok[4:]]
        except (ValueError, IndexError):
            raise FormatError(f"cameras.txt line {lineno}: malformed entry")
        if model == "PINHOLE":
            if len(params) != 4:
                raise FormatError(f"cameras.txt line {lineno}: PINHOLE needs 4 params")
            focal, cx, cy = params[0], params[2], params[3]
        elif model == "SIMPLE_PINHOLE":
            if len(params) != 3:
                raise FormatError(f"cameras.txt line {lineno}: SIMPLE_PINHOLE needs 3 params")
            focal, cx, cy = params
        else:
            raise FormatError(f"cameras.txt line {lineno}: unsupported model {model}")
        intrinsics[cam_id] = (focal, np.array([cx, cy]), (width, height))

    point_positions = {}
    for lineno, tok in _tokenized_lines(path / "points3D.txt"):
        try:
            pid = int(tok[0])
            xyz = np.array([float(tok[1]), float(tok[2]), float(tok[3])])
        except (ValueError, IndexError):
            raise FormatError(f"points3D.txt line {lineno}: malformed entry")
        point_positions[pid] = xyz

    cameras = []
    observers = {pid: set() for pid in point_positions}
    pending_header = None
    for lineno, tok in _tokenized_lines(path / "images.txt"):
        if pending_header is None:
            try:
                img_id = int(tok[0])
                qvec = np.array([float(v) for v in tok[1:5]])
                tvec = np.array([float(v) for v in tok[5:8]])
                cam_ref = int(tok[8])
            except (ValueError, IndexError):
                raise FormatError(f"images.txt line {lineno}: malformed image header")
            if cam_ref not in intrinsics:
                raise FormatError(f"images.txt line {lineno}: unknown camera {cam_ref}")
            pending_header = (img_id, qvec, tvec, cam_ref)
            continue
        img_id, qvec, tvec, cam_ref = pending_header
        pending_header = None
        if len(tok) % 3 != 0:
            raise FormatError(f"images.txt line {lineno}: malformed observation list")
        observed = set()
        for k in range(2, len(tok), 3):
            try:
                pid = int(tok[k])
            except ValueError:
                raise FormatError(f"images.txt line {lineno}: malformed observation list")
            if pid == -1:
                continue
            if pid not in point_positions:
                raise ConsistencyError(
                    f"image {img_id} references unknown point {pid}"
                )
            observed.add(pid)
            observers[pid].add(img_id)
        focal, pp, size = intrinsics[cam_ref]
        rot_cw = quat_normalize(qvec)
        r = quat_to_rotmat(rot_cw)
        position = -r.T @ tvec
        cameras.append(
            Camera(
                id=img_id,
                position=position,
                rotation=quat_conjugate(rot_cw),
                focal=focal,
                principal_point=pp,
                image_size=size,
                observed_points=observed,
            )
        )
    if pending_header is not None:
        raise FormatError("images.txt: truncated image entry")

    cameras.sort(key=lambda c: c.id)
    points = SparsePointSet(
        {pid: (point_positions[pid], frozenset(observers[pid])) for pid in point_positions}
    )
    if up_axis is None:
        up_axis = default_up_axis(np.array([c.position for c in cameras]))
    model = SceneModel(cameras=cameras, points=points, up_axis=up_axis)
    model.validate_observations()
    return model


def save_colmap_text(model, path):
    """Write a SceneModel as a COLMAP text sparse reconstruction."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "cameras.txt", "w") as f:
        for c in model.cameras:
            f.write(
                f"{c.id} PINHOLE {c.image_size[0]} {c.image_size[1]} "
                f"{float(c.focal)!r} {float(c.focal)!r} "
                f"{float(c.principal_point[0])!r} {float(c.principal_point[1])!r}\n"
            )
    with open(path / "images.txt", "w") as f:
        for c in model.cameras:
            q_cw = quat_conjugate(c.rotation)
            r = quat_to_rotmat(q_cw)
            t = -r @ c.position
            vals = " ".join(repr(float(v)) for v in [*q_cw, *t])
            f.write(f"{c.id} {vals} {c.id} img_{c.id}.png\n")
            obs = " ".join(f"0.0 0.0 {pid}" for pid in sorted(c.observed_points))
            f.write(obs + "\n")
    with open(path / "points3D.txt", "w") as f:
        for pid in sorted(model.points.points):
            xyz, obs = model.points.points[pid]
            track = " ".join(f"{cid} 0" for cid in sorted(obs))
            f.write(
                f"{pid} {float(xyz[0])!r} {float(xyz[1])!r} {float(xyz[2])!r} "
                f"128 128 128 0.0 {track}\n"
            )


def scene_to_json(model):
    return {
        "schema": SCENE_SCHEMA,
        "up_axis": [float(v) for v in model.up_axis],
        "cameras": [
            {
                "id": c.id,
                "position": [float(v) for v in c.position],
                "rotation": [float(v) for v in c.rotation],
                "focal": float(c.focal),
                "principal_point": [float(v) for v in c.principal_point],
                "image_size": [int(v) for v in c.image_size],
                "observed_points": sorted(c.observed_points),
            }
            for c in model.cameras
        ],
        "points": [
            {
                "id": pid,
                "position": [float(v) for v in xyz],
                "observing_cameras": sorted(obs),
            }
            for pid, (xyz, obs) in sorted(model.points.points.items())
        ],
    }


def scene_from_json(data):
    if data.get("schema") != SCENE_SCHEMA:
        raise FormatError(f"unexpected scene schema: {data.get('schema')}")
    cameras = [
        Camera(
            id=c["id"],
            position=c["position"],
            rotation=c["rotation"],
            focal=c["focal"],
            principal_point=c["principal_point"],
            image_size=tuple(c["image_size"]),
            observed_points=frozenset(c["observed_points"]),
        )
        for c in data["cameras"]
    ]
    points = SparsePointSet(
        {
            p["id"]: (np.array(p["position"], dtype=float), frozenset(p["observing_cameras"]))
            for p in data["points"]
        }
    )
    model = SceneModel(cameras=cameras, points=points, up_axis=data["up_axis"])
    model.validate_observations()
    return model


def save_scene_json(model, path):
    Path(path).write_text(json.dumps(scene_to_json(model), indent=1, sort_keys=True))


def load_scene_json(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise FormatError(f"missing file: {path}")
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})")
    return scene_from_json(data)
