import numpy as np
import pytest

from occlupart.errors import FormatError
from occlupart.sfm_model import Camera
from occlupart.splat_scene import (
    ALPHA_MIN,
    COV2D_DILATION,
    SH_C0,
    GaussianScene,
    backside_camera,
    load_ply,
    rasterize,
    rasterize_reference,
    save_ply,
)

IDENTITY = [1.0, 0.0, 0.0, 0.0]


def _camera(position=(0.0, 0.0, -2.0), focal=60.0, size=64):
    return Camera(
        id=0,
        position=np.array(position, dtype=float),
        rotation=np.array(IDENTITY),
        focal=focal,
        principal_point=np.array([size / 2, size / 2]),
        image_size=(size, size),
    )


def _single_splat(opacity=0.8, scale=0.1, color=(1.0, 0.0, 0.0)):
    return GaussianScene(
        means=[[0.0, 0.0, 0.0]],
        scales=[[scale] * 3],
        rotations=[IDENTITY],
        opacities=[opacity],
        colors=[list(color)],
    )


def test_scene_validation():
    with pytest.raises(ValueError):
        _single_splat(opacity=1.0)
    with pytest.raises(ValueError):
        _single_splat(scale=-0.1)
    with pytest.raises(ValueError):
        GaussianScene([[0, 0, 0]], [[0.1] * 3], [[2.0, 0, 0, 0]], [0.5], [[1, 0, 0]])
    with pytest.raises(ValueError):
        GaussianScene([[0, 0, 0], [1, 1, 1]], [[0.1] * 3], [IDENTITY], [0.5], [[1, 0, 0]])


def test_subset_and_concatenate():
    s = GaussianScene(
        means=np.arange(12.0).reshape(4, 3) * 0.1,
        scales=np.full((4, 3), 0.1),
        rotations=[IDENTITY] * 4,
        opacities=[0.2, 0.4, 0.6, 0.8],
        colors=np.full((4, 3), 0.5),
    )
    sub = s.subset([2, 0])
    assert len(sub) == 2
    assert sub.opacities.tolist() == [0.6, 0.2]
    combo = GaussianScene.concatenate([sub, s.subset([1])])
    assert len(combo) == 3
    assert combo.opacities.tolist() == [0.6, 0.2, 0.4]
    assert len(GaussianScene.concatenate([])) == 0
    g = s[3]
    assert g.opacity == 0.8
    assert np.array_equal(g.mean, s.means[3])


def test_world_covariances():
    from occlupart.rotations import axis_angle_quat, quat_to_rotmat

    q = axis_angle_quat([0.0, 0.0, 1.0], 0.7)
    s = GaussianScene([[0, 0, 0]], [[0.3, 0.1, 0.2]], [q], [0.5], [[1, 1, 1]])
    r = quat_to_rotmat(q)
    expected = r @ np.diag([0.09, 0.01, 0.04]) @ r.T
    assert np.allclose(s.world_covariances()[0], expected, atol=1e-12)


def test_single_splat_center_pixel_closed_form():
    """Isotropic splat on the optical axis: compositing weight at a pixel is
    opacity * exp(-0.5 * d^2 / sigma2) with sigma2 = (f s / z)^2 + dilation."""
    opacity, scale, focal, depth, size = 0.8, 0.1, 60.0, 2.0, 64
    scene = _single_splat(opacity=opacity, scale=scale)
    cam = _camera(focal=focal, size=size)
    out = rasterize(scene, cam, size, size)
    sigma2 = (focal * scale / depth) ** 2 + COV2D_DILATION
    # center projects to (32, 32); nearest sample sits at (31.5, 31.5)
    d2 = 0.5**2 + 0.5**2
    expected = opacity * np.exp(-0.5 * d2 / sigma2)
    assert np.isclose(out.image[31, 31, 0], expected, atol=1e-12)
    assert np.isclose(out.max_weight[0], expected, atol=1e-12)
    assert out.image[31, 31, 1] == 0.0  # pure red splat


def test_rasterize_weight_modes_and_empty():
    scene = _single_splat()
    cam = _camera()
    w_max = rasterize(scene, cam, 64, 64, weight_mode="max").max_weight[0]
    w_sum = rasterize(scene, cam, 64, 64, weight_mode="sum").max_weight[0]
    assert w_sum > w_max > 0.0
    with pytest.raises(ValueError):
        rasterize(scene, cam, 64, 64, weight_mode="mean")
    empty = rasterize(GaussianScene.empty(), cam, 64, 64)
    assert empty.image.shape == (64, 64, 3)
    assert np.all(empty.image == 0.0)


def test_rasterize_culls_behind_and_outside():
    cam = _camera(position=(0.0, 0.0, -2.0))
    behind = GaussianScene([[0, 0, -5.0]], [[0.1] * 3], [IDENTITY], [0.9], [[1, 1, 1]])
    assert rasterize(behind, cam, 64, 64).max_weight[0] == 0.0
    lateral = GaussianScene([[50.0, 0, 0]], [[0.1] * 3], [IDENTITY], [0.9], [[1, 1, 1]])
    assert rasterize(lateral, cam, 64, 64).max_weight[0] == 0.0
    faint = _single_splat(opacity=ALPHA_MIN / 2)
    assert rasterize(faint, cam, 64, 64).max_weight[0] == 0.0


def test_front_to_back_occlusion_order():
    scene = GaussianScene(
        means=[[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]],  # front red, back green
        scales=[[0.2] * 3] * 2,
        rotations=[IDENTITY] * 2,
        opacities=[0.9, 0.9],
        colors=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    )
    out = rasterize(scene, _camera(), 64, 64)
    center = out.image[31, 31]
    assert center[0] > center[1]  # the front splat dominates
    assert out.max_weight[0] > out.max_weight[1]


def test_reference_matches_tiled_on_single_splat():
    scene = _single_splat()
    cam = _camera()
    a = rasterize(scene, cam, 64, 64).image
    b = rasterize_reference(scene, cam, 64, 64).image
    assert np.abs(a - b).max() <= 1e-12


def test_backside_camera_turns_around():
    cam = _camera()
    back = backside_camera(cam, np.array([0.0, 1.0, 0.0]))
    assert np.array_equal(back.position, cam.position)
    assert np.allclose(back.forward(), -cam.forward(), atol=1e-12)


def test_ply_empty_and_logit_trivials(tmp_path):
    save_ply(GaussianScene.empty(), tmp_path / "empty.ply")
    assert len(load_ply(tmp_path / "empty.ply")) == 0

    scene = _single_splat(opacity=0.5)
    save_ply(scene, tmp_path / "half.ply")
    raw = (tmp_path / "half.ply").read_bytes()
    body = raw.split(b"end_header\n", 1)[1]
    vals = np.frombuffer(body, dtype="<f4")
    assert vals[9 + 45] == 0.0  # logit(0.5) stored as exactly 0


def test_ply_roundtrip_random(tmp_path):
    rng = np.random.default_rng(9)
    n = 100
    rot = rng.normal(size=(n, 4))
    rot /= np.linalg.norm(rot, axis=1, keepdims=True)
    scene = GaussianScene(
        means=rng.uniform(-2, 2, (n, 3)),
        scales=rng.uniform(0.01, 1.0, (n, 3)),
        rotations=rot,
        opacities=rng.uniform(0.01, 0.99, n),
        colors=rng.uniform(0, 1, (n, 3)),
    )
    save_ply(scene, tmp_path / "s.ply")
    loaded = load_ply(tmp_path / "s.ply")
    assert np.abs(loaded.means - scene.means).max() < 1e-6
    assert np.abs(loaded.scales - scene.scales).max() < 1e-6
    assert np.abs(loaded.opacities - scene.opacities).max() < 1e-6
    assert np.abs(loaded.colors - scene.colors).max() < 1e-6
    dots = np.abs(np.sum(loaded.rotations * scene.rotations, axis=1))
    assert np.all(dots > 1.0 - 1e-6)


def test_ply_error_paths(tmp_path):
    not_ply = tmp_path / "x.ply"
    not_ply.write_bytes(b"obj\n")
    with pytest.raises(FormatError):
        load_ply(not_ply)

    missing = tmp_path / "m.ply"
    missing.write_bytes(
        b"ply\nformat binary_little_endian 1.0\nelement vertex 0\n"
        b"property float x\nend_header\n"
    )
    with pytest.raises(FormatError):
        load_ply(missing)

    save_ply(_single_splat(), tmp_path / "t.ply")
    data = (tmp_path / "t.ply").read_bytes()
    (tmp_path / "t.ply").write_bytes(data[:-8])  # truncate vertex payload
    with pytest.raises(FormatError):
        load_ply(tmp_path / "t.ply")
