import numpy as np
import pytest

from occlupart.errors import ConsistencyError, FormatError
from occlupart.sfm_model import (
    Camera,
    SceneModel,
    SparsePointSet,
    covisibility_count,
    default_up_axis,
    load_colmap_text,
    load_scene_json,
    save_colmap_text,
    save_scene_json,
    scene_from_json,
    scene_to_json,
)

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def _camera(cid, pos, observed=()):
    return Camera(
        id=cid,
        position=pos,
        rotation=IDENTITY,
        focal=100.0,
        principal_point=np.array([32.0, 32.0]),
        image_size=(64, 64),
        observed_points=frozenset(observed),
    )


def _model(cams, points):
    return SceneModel(cameras=cams, points=SparsePointSet(points), up_axis=[0.0, 0.0, 1.0])


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(
            id=0,
            position=np.zeros(3),
            rotation=np.array([1.0, 1.0, 0.0, 0.0]),  # not unit
            focal=100.0,
            principal_point=np.zeros(2),
            image_size=(64, 64),
        )
    with pytest.raises(ValueError):
        Camera(
            id=0,
            position=np.zeros(3),
            rotation=IDENTITY,
            focal=-1.0,
            principal_point=np.zeros(2),
            image_size=(64, 64),
        )


def test_covisibility_count_symmetry():
    cams = [
        _camera(0, np.zeros(3), {1, 2}),
        _camera(1, np.ones(3), {1, 2, 3}),
    ]
    pts = {
        1: (np.zeros(3), frozenset({0, 1})),
        2: (np.zeros(3), frozenset({0, 1})),
        3: (np.zeros(3), frozenset({1})),
    }
    m = _model(cams, pts)
    m.validate_observations()
    assert covisibility_count(m, 0, 1) == 2
    assert covisibility_count(m, 1, 0) == 2
    assert m.points.observing_cameras(1) == {0, 1}
    assert m.points.observing_cameras(3) == {1}


def test_validate_observations_detects_asymmetry():
    cams = [_camera(0, np.zeros(3), {1})]
    m = _model(cams, {1: (np.zeros(3), frozenset())})
    with pytest.raises(ConsistencyError):
        m.validate_observations()


def test_default_up_axis_least_variance():
    pos = np.array([[0.0, 0.0, 1.6], [5.0, 3.0, 1.6], [2.0, 8.0, 1.6]])
    assert np.array_equal(default_up_axis(pos), [0.0, 0.0, 1.0])


COLMAP_CAMERAS = "# comment line\n1 PINHOLE 64 64 100.0 100.0 32.0 32.0\n"
# 90 degrees about z (camera-from-world), t = (1, 2, 3)
COLMAP_IMAGES = (
    "7 0.7071067811865476 0.0 0.0 0.7071067811865476 1.0 2.0 3.0 1 img.png\n"
    "0.0 0.0 11 0.0 0.0 -1 0.0 0.0 12\n"
)
COLMAP_POINTS = (
    "11 0.5 0.5 0.5 128 128 128 0.0 7 0\n"
    "12 -0.5 0.25 1.0 128 128 128 0.0 7 0\n"
)


def _write_colmap(path, cameras=COLMAP_CAMERAS, images=COLMAP_IMAGES, points=COLMAP_POINTS):
    path.mkdir(exist_ok=True)
    (path / "cameras.txt").write_text(cameras)
    (path / "images.txt").write_text(images)
    (path / "points3D.txt").write_text(points)
    return path


def test_load_colmap_pose_oracle(tmp_path):
    """Camera center -R^T t for a 90-degree yaw: frozen hand-computed values."""
    m = load_colmap_text(_write_colmap(tmp_path / "c"))
    cam = m.camera(7)
    assert np.allclose(cam.position, [-2.0, 1.0, -3.0], atol=1e-6)
    assert np.allclose(cam.forward(), [0.0, 0.0, 1.0], atol=1e-12)
    assert cam.observed_points == {11, 12}  # -1 entries skipped
    assert cam.focal == 100.0
    assert m.points.observing_cameras(11) == {7}


def test_load_colmap_simple_pinhole(tmp_path):
    m = load_colmap_text(
        _write_colmap(tmp_path / "c", cameras="1 SIMPLE_PINHOLE 64 64 100.0 32.0 32.0\n")
    )
    assert m.camera(7).focal == 100.0


def test_load_colmap_error_paths(tmp_path):
    with pytest.raises(FormatError):
        load_colmap_text(tmp_path / "absent")
    with pytest.raises(FormatError):
        load_colmap_text(_write_colmap(tmp_path / "a", cameras="1 OPENCV 64 64 1 2 3 4\n"))
    with pytest.raises(FormatError):
        load_colmap_text(_write_colmap(tmp_path / "b", cameras="garbage entry\n"))
    with pytest.raises(FormatError):  # truncated image entry
        load_colmap_text(
            _write_colmap(tmp_path / "d", images=COLMAP_IMAGES.splitlines()[0] + "\n")
        )
    with pytest.raises(ConsistencyError):  # observation of unknown point
        load_colmap_text(
            _write_colmap(tmp_path / "e", images=COLMAP_IMAGES.replace(" 11 ", " 99 "))
        )


def test_colmap_roundtrip(tmp_path, small_bundle):
    save_colmap_text(small_bundle.model, tmp_path / "rt")
    m2 = load_colmap_text(tmp_path / "rt")
    assert m2.camera_ids() == small_bundle.model.camera_ids()
    for cam in small_bundle.model.cameras:
        cam2 = m2.camera(cam.id)
        assert np.allclose(cam2.position, cam.position, atol=1e-9)
        assert np.allclose(cam2.rotation_matrix(), cam.rotation_matrix(), atol=1e-9)
        assert cam2.observed_points == cam.observed_points
        assert covisibility_count(m2, cam.id, m2.camera_ids()[0]) == covisibility_count(
            small_bundle.model, cam.id, small_bundle.model.camera_ids()[0]
        )


def test_scene_json_roundtrip(tmp_path, small_bundle):
    path = tmp_path / "scene.json"
    save_scene_json(small_bundle.model, path)
    m2 = load_scene_json(path)
    assert m2.camera_ids() == small_bundle.model.camera_ids()
    for cam in small_bundle.model.cameras:
        cam2 = m2.camera(cam.id)
        assert np.array_equal(cam2.position, cam.position)
        assert np.array_equal(cam2.rotation, cam.rotation)
        assert cam2.observed_points == cam.observed_points
    assert scene_to_json(m2) == scene_to_json(small_bundle.model)


def test_scene_json_errors(tmp_path):
    with pytest.raises(FormatError):
        load_scene_json(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FormatError):
        load_scene_json(bad)
    with pytest.raises(FormatError):
        scene_from_json({"schema": "something-else/9"})
