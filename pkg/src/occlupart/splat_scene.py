"""Gaussian-splat scene model, 3DGS-convention PLY I/O, and a deterministic
forward-only CPU rasterizer that also reports per-Gaussian contribution
weights."""

from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .rotations import axis_angle_quat, quat_multiply, quat_to_rotmat

SH_C0 = 0.28209479177387814
ALPHA_MAX = 0.99
ALPHA_MIN = 1.0 / 255.0
T_EARLY_STOP = 1e-4
# splats closer than this are culled: the affine projection of a Gaussian
# degenerates as depth -> 0, smearing huge bogus footprints across the screen
NEAR_PLANE = 0.2
COV2D_DILATION = 0.3


@dataclass(frozen=True)
class Gaussian3D:
    mean: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    opacity: float
    color: np.ndarray


class GaussianScene:
    """Ordered collection of 3D Gaussians; the index of a Gaussian is its
    stable ID for visibility masks. Stored as packed arrays."""

    def __init__(self, means, scales, rotations, opacities, colors):
        self.means = np.atleast_2d(np.asarray(means, dtype=float)).reshape(-1, 3)
        self.scales = np.atleast_2d(np.asarray(scales, dtype=float)).reshape(-1, 3)
        self.rotations = np.atleast_2d(np.asarray(rotations, dtype=float)).reshape(-1, 4)
        self.opacities = np.asarray(opacities, dtype=float).reshape(-1)
        self.colors = np.atleast_2d(np.asarray(colors, dtype=float)).reshape(-1, 3)
        n = len(self.means)
        if not all(len(a) == n for a in (self.scales, self.rotations, self.opacities, self.colors)):
            raise ValueError("field lengths disagree")
        if n:
            if np.any(self.scales <= 0):
                raise ValueError("scales must be positive")
            if np.any((self.opacities <= 0) | (self.opacities >= 1)):
                raise ValueError("opacities must lie in (0, 1)")
            norms = np.linalg.norm(self.rotations, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("rotations must be unit quaternions")

    @classmethod
    def empty(cls):
        return cls(
            np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros(0), np.zeros((0, 3))
        )

    @classmethod
    def from_gaussians(cls, gaussians):
        if not gaussians:
            return cls.empty()
        return cls(
            [g.mean for g in gaussians],
            [g.scale for g in gaussians],
            [g.rotation for g in gaussians],
            [g.opacity for g in gaussians],
            [g.color for g in gaussians],
        )

    def __len__(self):
        return len(self.means)

    def __getitem__(self, i):
        return Gaussian3D(
            mean=self.means[i],
            scale=self.scales[i],
            rotation=self.rotations[i],
            opacity=float(self.opacities[i]),
            color=self.colors[i],
        )

    def subset(self, indices):
        idx = np.asarray(indices)
        return GaussianScene(
            self.means[idx],
            self.scales[idx],
            self.rotations[idx],
            self.opacities[idx],
            self.colors[idx],
        )

    def world_covariances(self):
        """Per-splat 3D covariance R diag(s^2) R^T, cached (view-independent)."""
        cached = getattr(self, "_cov3d", None)
        if cached is None or len(cached) != len(self):
            w, x, y, z = self.rotations.T
            rot = np.empty((len(self), 3, 3))
            rot[:, 0, 0] = 1 - 2 * (y * y + z * z)
            rot[:, 0, 1] = 2 * (x * y - w * z)
            rot[:, 0, 2] = 2 * (x * z + w * y)
            rot[:, 1, 0] = 2 * (x * y + w * z)
            rot[:, 1, 1] = 1 - 2 * (x * x + z * z)
            rot[:, 1, 2] = 2 * (y * z - w * x)
            rot[:, 2, 0] = 2 * (x * z - w * y)
            rot[:, 2, 1] = 2 * (y * z + w * x)
            rot[:, 2, 2] = 1 - 2 * (x * x + y * y)
            rs = rot * (self.scales**2)[:, None, :]
            cached = np.einsum("nij,nkj->nik", rs, rot)
            self._cov3d = cached
        return cached

    @classmethod
    def concatenate(cls, scenes):
        scenes = [s for s in scenes if len(s)]
        if not scenes:
            return cls.empty()
        return cls(
            np.concatenate([s.means for s in scenes]),
            np.concatenate([s.scales for s in scenes]),
            np.concatenate([s.rotations for s in scenes]),
            np.concatenate([s.opacities for s in scenes]),
            np.concatenate([s.colors for s in scenes]),
        )


@dataclass
class RenderResult:
    image: np.ndarray
    max_weight: np.ndarray


# ---------------------------------------------------------------------------
# PLY I/O (reference-implementation property layout)

_PLY_BASE = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
_PLY_REST = [f"f_rest_{i}" for i in range(45)]
_PLY_TAIL = ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]


def save_ply(scene, path):
    """Write a scene as a 3DGS-convention binary PLY (log scales, logit
    opacity, DC spherical-harmonics color; higher-order SH written as zeros)."""
    names = _PLY_BASE + _PLY_REST + _PLY_TAIL
    n = len(scene)
    data = np.zeros((n, len(names)), dtype="<f4")
    data[:, 0:3] = scene.means
    data[:, 6:9] = (scene.colors - 0.5) / SH_C0
    off = 9 + 45
    data[:, off] = np.log(scene.opacities / (1.0 - scene.opacities))
    data[:, off + 1 : off + 4] = np.log(scene.scales)
    data[:, off + 4 : off + 8] = scene.rotations
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(data.tobytes())


def load_ply(path):
    """Load a 3DGS-convention binary PLY; higher-order SH terms are ignored."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"ply":
            raise FormatError("not a PLY file")
        names = []
        count = None
        while True:
            line = f.readline()
            if not line:
                raise FormatError("unterminated PLY header")
            tok = line.decode("ascii", "replace").split()
            if not tok:
                continue
            if tok[0] == "end_header":
                break
            if tok[0] == "format":
                if tok[1] != "binary_little_endian":
                    raise FormatError(f"unsupported PLY format: {tok[1]}")
            elif tok[0] == "element":
                if tok[1] == "vertex":
                    count = int(tok[2])
            elif tok[0] == "property":
                if tok[1] != "float":
                    raise FormatError(f"unsupported property type: {tok[1]}")
                names.append(tok[2])
        if count is None:
            raise FormatError("missing vertex element")
        needed = _PLY_BASE[:3] + ["f_dc_0", "f_dc_1", "f_dc_2"] + _PLY_TAIL
        for name in needed:
            if name not in names:
                raise FormatError(f"missing property: {name}")
        raw = np.frombuffer(f.read(4 * count * len(names)), dtype="<f4")
        if raw.size != count * len(names):
            raise FormatError("truncated vertex data")
        raw = raw.reshape(count, len(names)).astype(float)
    col = {name: i for i, name in enumerate(names)}
    if count == 0:
        return GaussianScene.empty()
    means = raw[:, [col["x"], col["y"], col["z"]]]
    f_dc = raw[:, [col["f_dc_0"], col["f_dc_1"], col["f_dc_2"]]]
    opac = 1.0 / (1.0 + np.exp(-raw[:, col["opacity"]]))
    scales = np.exp(raw[:, [col["scale_0"], col["scale_1"], col["scale_2"]]])
    rots = raw[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]]
    norms = np.linalg.norm(rots, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return GaussianScene(means, scales, rots / norms, opac, 0.5 + SH_C0 * f_dc)


# ---------------------------------------------------------------------------
# Rasterization

def _project(scene, cam, width, height):
    """Shared projection stage: screen means, 2D conics, per-splat peak alpha
    and a validity mask. Used by both rasterizer paths.

    When the requested output size differs from the camera's native image
    size, the intrinsics are rescaled so the field of view is preserved."""
    n = len(scene)
    r_wc = quat_to_rotmat(cam.rotation)
    w = r_wc.T  # world -> camera
    p_cam = (scene.means - cam.position) @ w.T
    depth = p_cam[:, 2]
    valid = depth > NEAR_PLANE
    sx = width / cam.image_size[0]
    sy = height / cam.image_size[1]
    fx = cam.focal * sx
    fy = cam.focal * sy
    cx = cam.principal_point[0] * sx
    cy = cam.principal_point[1] * sy
    z = np.where(valid, depth, 1.0)
    # frustum cull at 1.3x the view cone: the affine (EWA) projection of a
    # Gaussian far outside the frustum degenerates and would smear spurious
    # alpha across the image; at this margin real tail contributions are
    # already below the 1/255 alpha floor
    valid &= np.abs(p_cam[:, 0]) <= 1.3 * (width / (2.0 * fx)) * z
    valid &= np.abs(p_cam[:, 1]) <= 1.3 * (height / (2.0 * fy)) * z
    px = fx * p_cam[:, 0] / z + cx
    py = fy * p_cam[:, 1] / z + cy

    cov3d = scene.world_covariances()
    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = fx / z
    jac[:, 1, 1] = fy / z
    jac[:, 0, 2] = -fx * p_cam[:, 0] / z**2
    jac[:, 1, 2] = -fy * p_cam[:, 1] / z**2
    t = jac @ w  # (n, 2, 3)
    cov2d = np.einsum("nij,njk,nlk->nil", t, cov3d, t)
    cov2d[:, 0, 0] += COV2D_DILATION
    cov2d[:, 1, 1] += COV2D_DILATION

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    valid &= det > 1e-12
    det_safe = np.where(valid, det, 1.0)
    conic = np.empty((n, 3))
    conic[:, 0] = cov2d[:, 1, 1] / det_safe
    conic[:, 1] = -cov2d[:, 0, 1] / det_safe
    conic[:, 2] = cov2d[:, 0, 0] / det_safe
    valid &= scene.opacities > ALPHA_MIN
    # splat radius: beyond it alpha is guaranteed below the 1/255 floor
    trace = cov2d[:, 0, 0] + cov2d[:, 1, 1]
    lam_max = 0.5 * trace + np.sqrt(np.maximum(0.25 * trace**2 - det, 0.0))
    log_ratio = np.log(np.maximum(scene.opacities, 1e-12) / ALPHA_MIN)
    radius = np.sqrt(np.maximum(2.0 * log_ratio, 0.0) * np.maximum(lam_max, 0.0)) + 1.0
    valid &= (px + radius > 0) & (px - radius < width) & (py + radius > 0) & (py - radius < height)
    return px, py, depth, conic, radius, valid


def _depth_order(depth, valid):
    idx = np.flatnonzero(valid)
    return idx[np.argsort(depth[idx], kind="stable")]


def rasterize(scene, cam, width, height, weight_mode="max"):
    """Forward 3DGS render with front-to-back alpha compositing.

    Each splat is evaluated only inside its screen-space bounding box; pixels
    whose transmittance has fallen below 1e-4 stop accepting contributions.
    `max_weight[i]` records Gaussian i's largest per-pixel compositing weight
    alpha*T (or, with weight_mode="sum", its total weight summed over pixels).
    """
    if weight_mode not in ("max", "sum"):
        raise ValueError("weight_mode must be 'max' or 'sum'")
    image = np.zeros((height, width, 3))
    max_weight = np.zeros(len(scene))
    if len(scene) == 0:
        return RenderResult(image=image, max_weight=max_weight)
    px, py, depth, conic, radius, valid = _project(scene, cam, width, height)
    order = _depth_order(depth, valid)
    transmittance = np.ones((height, width))
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    for i in order:
        x0 = max(int(np.floor(px[i] - radius[i])), 0)
        x1 = min(int(np.ceil(px[i] + radius[i])) + 1, width)
        y0 = max(int(np.floor(py[i] - radius[i])), 0)
        y1 = min(int(np.ceil(py[i] + radius[i])) + 1, height)
        if x0 >= x1 or y0 >= y1:
            continue
        dx = xs[x0:x1] - px[i]
        dy = ys[y0:y1] - py[i]
        a, b, c = conic[i]
        power = -0.5 * (a * dx[None, :] ** 2 + c * dy[:, None] ** 2) - b * dy[:, None] * dx[None, :]
        alpha = np.minimum(scene.opacities[i] * np.exp(power), ALPHA_MAX)
        t_patch = transmittance[y0:y1, x0:x1]
        alpha = np.where((alpha >= ALPHA_MIN) & (t_patch >= T_EARLY_STOP), alpha, 0.0)
        w = alpha * t_patch
        if weight_mode == "max":
            max_weight[i] = w.max(initial=0.0)
        else:
            max_weight[i] = w.sum()
        image[y0:y1, x0:x1] += w[:, :, None] * scene.colors[i]
        transmittance[y0:y1, x0:x1] = t_patch * (1.0 - alpha)
    return RenderResult(image=np.clip(image, 0.0, 1.0), max_weight=max_weight)


def rasterize_reference(scene, cam, width, height):
    """Naive reference: every surviving splat evaluated at every pixel, no
    bounding boxes and no early termination."""
    image = np.zeros((height, width, 3))
    max_weight = np.zeros(len(scene))
    if len(scene) == 0:
        return RenderResult(image=image, max_weight=max_weight)
    px, py, depth, conic, radius, valid = _project(scene, cam, width, height)
    order = _depth_order(depth, valid)
    transmittance = np.ones((height, width))
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    for i in order:
        dx = gx - px[i]
        dy = gy - py[i]
        a, b, c = conic[i]
        power = -0.5 * (a * dx**2 + c * dy**2) - b * dx * dy
        alpha = np.minimum(scene.opacities[i] * np.exp(power), ALPHA_MAX)
        alpha = np.where(alpha >= ALPHA_MIN, alpha, 0.0)
        w = alpha * transmittance
        max_weight[i] = w.max(initial=0.0)
        image += w[:, :, None] * scene.colors[i]
        transmittance = transmittance * (1.0 - alpha)
    return RenderResult(image=np.clip(image, 0.0, 1.0), max_weight=max_weight)


def backside_camera(cam, up):
    """Same viewpoint rotated 180 degrees about the up axis (yaw flip)."""
    from .sfm_model import Camera

    flip = axis_angle_quat(up, np.pi)
    q = quat_multiply(flip, cam.rotation)
    q = q / np.linalg.norm(q)
    return Camera(
        id=cam.id,
        position=cam.position,
        rotation=q,
        focal=cam.focal,
        principal_point=cam.principal_point,
        image_size=cam.image_size,
        observed_points=cam.observed_points,
    )
