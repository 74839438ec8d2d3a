import math

import numpy as np
import pytest

from reshoot.geometry import CameraIntrinsics, CameraPose, rotation_about_axis
from reshoot.render import RenderOptions, RenderOutput


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def random_pose(rng: np.random.Generator, spread: float = 5.0) -> CameraPose:
    return CameraPose(random_rotation(rng), rng.uniform(-spread, spread, 3))


def random_intrinsics(rng: np.random.Generator, width=64, height=64) -> CameraIntrinsics:
    f = rng.uniform(0.5, 3.0) * max(width, height)
    return CameraIntrinsics(
        fx=f * rng.uniform(0.9, 1.1), fy=f,
        cx=width * rng.uniform(0.3, 0.7), cy=height * rng.uniform(0.3, 0.7),
        width=width, height=height)


def brute_force_render(points, colors, K: CameraIntrinsics, T: CameraPose,
                       opts: RenderOptions) -> RenderOutput:
    """Reference rasterizer: per point, walk its square footprint and update a
    z-buffer keyed lexicographically by (depth, point index)."""
    h, w, r = K.height, K.width, opts.point_radius
    best = [[None] * w for _ in range(h)]  # (depth, index) per pixel
    for i in range(len(points)):
        x, y, z = T.inverse_apply(points[i])
        if not z > opts.near_clip:
            continue
        u = K.fx * x / z + K.cx
        v = K.fy * y / z + K.cy
        if not (math.isfinite(u) and math.isfinite(v)):
            continue
        pu = math.floor(u + 0.5)
        pv = math.floor(v + 0.5)
        for py in range(pv - r, pv + r + 1):
            if not 0 <= py < h:
                continue
            for px in range(pu - r, pu + r + 1):
                if not 0 <= px < w:
                    continue
                cand = (z, i)
                if best[py][px] is None or cand < best[py][px]:
                    best[py][px] = cand
    color = np.tile(np.asarray(opts.background, dtype=np.float64), (h, w, 1))
    alpha = np.zeros((h, w), dtype=bool)
    depth = np.full((h, w), np.inf)
    for py in range(h):
        for px in range(w):
            if best[py][px] is not None:
                z, i = best[py][px]
                alpha[py, px] = True
                depth[py, px] = z
                color[py, px] = colors[i]
    return RenderOutput(color=color, alpha=alpha, depth=depth)


def orbit_poses(n: int, radius: float = 4.0, arc: float = math.pi / 2) -> list[CameraPose]:
    """Cameras on a circular arc around the origin, looking at it."""
    poses = []
    for i in range(n):
        a = arc * i / max(n - 1, 1)
        center = np.array([radius * math.sin(a), 0.0, -radius * math.cos(a)])
        look = -center / np.linalg.norm(center)     # toward origin
        right = np.cross(np.array([0.0, 1.0, 0.0]), look)
        right /= np.linalg.norm(right)
        down = np.cross(look, right)
        R = np.stack([right, down, look], axis=1)
        poses.append(CameraPose(R, center))
    return poses


@pytest.fixture
def rng():
    return np.random.default_rng(0)
