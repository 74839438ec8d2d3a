"""Pinhole camera math: projection, unprojection, rigid transforms, ray images.

Conventions (fixed for the whole toolkit):
  - camera space: +z forward, +x right, +y down
  - poses stored camera-to-world as (rotation, center)
  - depth-map lifting addresses pixels at integer coordinates;
    ray/Plucker generation samples pixel centers at (u + 0.5, v + 0.5)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, InvalidDepthError, ShapeError

_ORTHO_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ShapeError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (self.width >= 1 and self.height >= 1):
            raise ShapeError(f"image size must be >= 1, got {self.width}x{self.height}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ShapeError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )
        if not math.isfinite(self.fov_v_deg):
            raise ShapeError("vertical FOV is not finite")

    @property
    def fov_v_deg(self) -> float:
        """Vertical field of view in degrees."""
        return math.degrees(2.0 * math.atan(self.height / (2.0 * self.fy)))

    def with_fov_v(self, fov_v_deg: float) -> "CameraIntrinsics":
        """New intrinsics with the given vertical FOV; fx/fy ratio preserved."""
        fy = self.height / (2.0 * math.tan(math.radians(fov_v_deg) / 2.0))
        fx = fy * (self.fx / self.fy)
        return CameraIntrinsics(fx, fy, self.cx, self.cy, self.width, self.height)

    def scaled(self, scale: float) -> "CameraIntrinsics":
        """Intrinsics for a resized image (preview rendering)."""
        w = max(1, int(round(self.width * scale)))
        h = max(1, int(round(self.height * scale)))
        sx, sy = w / self.width, h / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, w, h)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(d["fx"], d["fy"], d["cx"], d["cy"], int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class CameraPose:
    """Rigid camera-to-world transform: world_point = rotation @ cam_point + center."""

    rotation: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ShapeError(f"rotation must be 3x3, got {R.shape}")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(c)):
            raise ShapeError("pose contains non-finite values")
        if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL:
            raise ShapeError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ShapeError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", _freeze(R))
        object.__setattr__(self, "center", _freeze(c))

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    def inverse_apply(self, world_points: np.ndarray) -> np.ndarray:
        """World -> camera space for an (N, 3) or (3,) array."""
        p = np.asarray(world_points, dtype=np.float64)
        return (p - self.center) @ self.rotation

    def apply(self, cam_points: np.ndarray) -> np.ndarray:
        """Camera -> world space for an (N, 3) or (3,) array."""
        p = np.asarray(cam_points, dtype=np.float64)
        return p @ self.rotation.T + self.center

    def compose(self, other: "CameraPose") -> "CameraPose":
        """self after other: (self ∘ other)(p) = self(other(p))."""
        return CameraPose(self.rotation @ other.rotation,
                          self.rotation @ other.center + self.center)

    def inverse(self) -> "CameraPose":
        return CameraPose(self.rotation.T, -self.rotation.T @ self.center)

    def allclose(self, other: "CameraPose", atol: float = 1e-9) -> bool:
        return (np.abs(self.rotation - other.rotation).max() <= atol
                and np.abs(self.center - other.center).max() <= atol)

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.reshape(9).tolist(),
                "center": self.center.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls(np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
                   np.asarray(d["center"], dtype=np.float64))


def camera_to_dict(K: CameraIntrinsics, T: CameraPose) -> dict:
    """Single-frame camera JSON record."""
    d = K.to_dict()
    d.update(T.to_dict())
    return d


def camera_from_dict(d: dict) -> tuple[CameraIntrinsics, CameraPose]:
    return CameraIntrinsics.from_dict(d), CameraPose.from_dict(d)


def unproject(pixel, depth: float, K: CameraIntrinsics) -> np.ndarray:
    """Lift a continuous pixel coordinate at the given depth to camera space."""
    if not (np.isfinite(depth) and depth > 0):
        raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
    u, v = pixel
    return np.array([(u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, depth])


def project(point, K: CameraIntrinsics) -> tuple[tuple[float, float], float]:
    """Project a camera-space point; returns ((u, v), depth)."""
    x, y, z = np.asarray(point, dtype=np.float64)
    if not z > 0:
        raise BehindCameraError(f"point has non-positive depth z={z}")
    return (K.fx * x / z + K.cx, K.fy * y / z + K.cy), float(z)


def cam_to_world(point, T: CameraPose) -> np.ndarray:
    return T.apply(np.asarray(point, dtype=np.float64))


def world_to_cam(point, T: CameraPose) -> np.ndarray:
    return T.inverse_apply(np.asarray(point, dtype=np.float64))


def unproject_grid(depth: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Camera-space points for every pixel of a depth map, at integer pixel coords.

    Returns an (H, W, 3) array; invalid depths pass through untouched
    (callers mask them out).
    """
    h, w = depth.shape
    if (w, h) != (K.width, K.height):
        raise ShapeError(f"depth map {w}x{h} does not match intrinsics {K.width}x{K.height}")
    u = np.arange(w, dtype=np.float64)
    v = np.arange(h, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    d = np.asarray(depth, dtype=np.float64)
    return np.stack([(uu - K.cx) * d / K.fx, (vv - K.cy) * d / K.fy, d], axis=-1)


def project_points(points: np.ndarray, K: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) camera-space points -> (uv (N, 2), depth (N,)).

    Does not validate z; callers filter by depth themselves.
    """
    p = np.asarray(points, dtype=np.float64)
    z = p[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * p[:, 0] / z + K.cx
        v = K.fy * p[:, 1] / z + K.cy
    return np.stack([u, v], axis=-1), z


@dataclass(frozen=True)
class PluckerImage:
    """Per-pixel ray image: channels 0-2 unit direction, 3-5 moment = origin x direction."""

    data: np.ndarray  # (H, W, 6) float64

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or d.shape[2] != 6:
            raise ShapeError(f"expected (H, W, 6) ray image, got {d.shape}")
        object.__setattr__(self, "data", _freeze(d))

    @property
    def directions(self) -> np.ndarray:
        return self.data[..., :3]

    @property
    def moments(self) -> np.ndarray:
        return self.data[..., 3:]


def plucker_image(K: CameraIntrinsics, T: CameraPose) -> PluckerImage:
    """Ray image for a camera: d = world-space unit ray direction, m = center x d.

    Rays are cast through pixel centers (u + 0.5, v + 0.5).
    """
    u = np.arange(K.width, dtype=np.float64) + 0.5
    v = np.arange(K.height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack([(uu - K.cx) / K.fx, (vv - K.cy) / K.fy, np.ones_like(uu)], axis=-1)
    dirs = dirs_cam @ T.rotation.T
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    moments = np.cross(np.broadcast_to(T.center, dirs.shape), dirs)
    return PluckerImage(np.concatenate([dirs, moments], axis=-1))


# Quaternion helpers (w, x, y, z). Used by trajectory interpolation/smoothing;
# rotations everywhere else stay as matrices.

def quat_from_rotmat(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = 0.5 / math.sqrt(t + 1.0)
        q = np.array([0.25 / s,
                      (R[2, 1] - R[1, 2]) * s,
                      (R[0, 2] - R[2, 0]) * s,
                      (R[1, 0] - R[0, 1]) * s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                      (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                      0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    return q / np.linalg.norm(q)


def rotmat_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def slerp(q0: np.ndarray, q1: np.ndarray, s: float) -> np.ndarray:
    """Shortest-path spherical interpolation between unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    dot = float(np.dot(q0, q1))
    if dot < 0:
        q1, dot = -q1, -dot
    if dot > 1.0 - 1e-12:
        q = (1 - s) * q0 + s * q1
        return q / np.linalg.norm(q)
    theta = math.acos(min(dot, 1.0))
    return (math.sin((1 - s) * theta) * q0 + math.sin(s * theta) * q1) / math.sin(theta)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar projection via SVD), det forced to +1."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=np.float64))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
