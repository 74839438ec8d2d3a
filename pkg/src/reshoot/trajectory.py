"""Camera paths: keyframe interpolation, Gaussian smoothing, heuristic source
cameras, and first-frame retargeting.

Keyframe center interpolation uses a Kochanek-Bartels spline with per-keyframe
tension (continuity and bias fixed at 0); rotations use piecewise shortest-path
quaternion slerp; vertical FOV interpolates linearly in degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyInputError, ShapeError
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    camera_from_dict,
    camera_to_dict,
    orthonormalize,
    quat_from_rotmat,
    rotation_about_axis,
    rotmat_from_quat,
    slerp,
)


@dataclass(frozen=True)
class CameraKeyframe:
    frame_index: int
    pose: CameraPose
    fov_v: float  # degrees
    tension: float = 0.0

    def __post_init__(self):
        if self.frame_index < 0:
            raise ShapeError(f"keyframe frame_index must be >= 0, got {self.frame_index}")
        if not 0.0 < self.fov_v < 180.0:
            raise ShapeError(f"fov_v must be in (0, 180), got {self.fov_v}")
        if not -1.0 <= self.tension <= 1.0:
            raise ShapeError(f"tension must be in [-1, 1], got {self.tension}")


@dataclass(frozen=True)
class KeyframeTrack:
    keyframes: tuple[CameraKeyframe, ...]
    total_frames: int

    def __post_init__(self):
        kfs = tuple(self.keyframes)
        if not kfs:
            raise EmptyInputError("track needs at least one keyframe")
        idx = [k.frame_index for k in kfs]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ShapeError(f"keyframe indices must be strictly increasing, got {idx}")
        if idx[-1] >= self.total_frames:
            raise ShapeError(
                f"last keyframe {idx[-1]} not below total_frames {self.total_frames}")
        object.__setattr__(self, "keyframes", kfs)

    def to_dict(self) -> dict:
        return {
            "total_frames": self.total_frames,
            "keyframes": [
                {
                    "frame": k.frame_index,
                    "rotation": k.pose.rotation.reshape(9).tolist(),
                    "center": k.pose.center.tolist(),
                    "fov_v": k.fov_v,
                    "tension": k.tension,
                }
                for k in self.keyframes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KeyframeTrack":
        kfs = tuple(
            CameraKeyframe(
                frame_index=int(k["frame"]),
                pose=CameraPose(
                    np.asarray(k["rotation"], dtype=np.float64).reshape(3, 3),
                    np.asarray(k["center"], dtype=np.float64),
                ),
                fov_v=float(k["fov_v"]),
                tension=float(k.get("tension", 0.0)),
            )
            for k in d["keyframes"]
        )
        return cls(keyframes=kfs, total_frames=int(d["total_frames"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, s: str) -> "KeyframeTrack":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class CameraSequence:
    """Dense per-frame cameras: parallel pose/intrinsics tuples."""

    poses: tuple[CameraPose, ...]
    intrinsics: tuple[CameraIntrinsics, ...]

    def __post_init__(self):
        poses = tuple(self.poses)
        intr = tuple(self.intrinsics)
        if len(poses) != len(intr):
            raise ShapeError(f"{len(poses)} poses vs {len(intr)} intrinsics")
        if not poses:
            raise EmptyInputError("camera sequence must be non-empty")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "intrinsics", intr)

    def __len__(self) -> int:
        return len(self.poses)

    def __getitem__(self, i: int) -> tuple[CameraPose, CameraIntrinsics]:
        return self.poses[i], self.intrinsics[i]

    def centers(self) -> np.ndarray:
        return np.stack([p.center for p in self.poses])

    def to_list(self) -> list[dict]:
        return [camera_to_dict(K, T) for T, K in zip(self.poses, self.intrinsics)]

    @classmethod
    def from_list(cls, records: list[dict]) -> "CameraSequence":
        cams = [camera_from_dict(r) for r in records]
        return cls(poses=tuple(T for _, T in cams), intrinsics=tuple(K for K, _ in cams))

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=2)

    @classmethod
    def from_json(cls, s: str) -> "CameraSequence":
        return cls.from_list(json.loads(s))


def _quadratic_endpoint_tangent(x: np.ndarray, p: np.ndarray, at: int) -> np.ndarray:
    """Derivative at x[at] of the quadratic through three (x, p) samples."""
    x0, x1, x2 = x
    xa = x[at]
    return (p[0] * (2 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + p[1] * (2 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + p[2] * (2 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1)))


def _kb_tangents(frames: np.ndarray, centers: np.ndarray, tensions: np.ndarray) -> np.ndarray:
    """Per-keyframe center tangents (derivative w.r.t. frame index).

    Interior keyframes use the centered difference; endpoints use a
    quadratic-fit one-sided derivative when three keyframes exist.
    """
    n = len(frames)
    tangents = np.zeros_like(centers)
    for i in range(n):
        if n == 1:
            continue
        if 0 < i < n - 1:
            d = (centers[i + 1] - centers[i - 1]) / (frames[i + 1] - frames[i - 1])
        elif n >= 3 and i == 0:
            d = _quadratic_endpoint_tangent(frames[:3], centers[:3], 0)
        elif n >= 3:
            d = _quadratic_endpoint_tangent(frames[-3:], centers[-3:], 2)
        elif i == 0:
            d = (centers[1] - centers[0]) / (frames[1] - frames[0])
        else:
            d = (centers[-1] - centers[-2]) / (frames[-1] - frames[-2])
        tangents[i] = (1.0 - tensions[i]) * d
    return tangents


def interpolate_track(track: KeyframeTrack, base_K: CameraIntrinsics) -> CameraSequence:
    """Densify a keyframe track to one camera per frame.

    Frames before the first keyframe and after the last hold its value.
    FOV is converted back to focal lengths preserving base_K's fx/fy ratio.
    """
    kfs = track.keyframes
    frames = np.array([k.frame_index for k in kfs], dtype=np.float64)
    centers = np.stack([k.pose.center for k in kfs])
    fovs = np.array([k.fov_v for k in kfs])
    tensions = np.array([k.tension for k in kfs])
    quats = [quat_from_rotmat(k.pose.rotation) for k in kfs]
    # hemisphere-align consecutive quaternions for consistent slerp
    for i in range(1, len(quats)):
        if np.dot(quats[i - 1], quats[i]) < 0:
            quats[i] = -quats[i]
    tangents = _kb_tangents(frames, centers, tensions)

    poses = []
    intr = []
    for f in range(track.total_frames):
        if f <= kfs[0].frame_index:
            pose, fov = kfs[0].pose, kfs[0].fov_v
        elif f >= kfs[-1].frame_index:
            pose, fov = kfs[-1].pose, kfs[-1].fov_v
        else:
            i = int(np.searchsorted(frames, f, side="right")) - 1
            f0, f1 = frames[i], frames[i + 1]
            dt = f1 - f0
            s = (f - f0) / dt
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            center = (h00 * centers[i] + h10 * dt * tangents[i]
                      + h01 * centers[i + 1] + h11 * dt * tangents[i + 1])
            q = slerp(quats[i], quats[i + 1], s)
            pose = CameraPose(orthonormalize(rotmat_from_quat(q)), center)
            fov = (1 - s) * fovs[i] + s * fovs[i + 1]
        poses.append(pose)
        intr.append(base_K.with_fov_v(fov))
    return CameraSequence(poses=tuple(poses), intrinsics=tuple(intr))


def _gauss_weights(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-0.5 * (k / sigma) ** 2)


def gaussian_smooth(seq: CameraSequence, sigma: float) -> CameraSequence:
    """Smooth centers, FOV, and rotations with a truncated (+-3 sigma) Gaussian.

    Windows are clipped at sequence edges and renormalized. Rotations are
    smoothed by hemisphere-aligned weighted quaternion averaging.
    """
    if not sigma > 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    n = len(seq)
    weights = _gauss_weights(sigma)
    radius = len(weights) // 2
    centers = seq.centers()
    fovs = np.array([K.fov_v_deg for K in seq.intrinsics])
    quats = np.stack([quat_from_rotmat(p.rotation) for p in seq.poses])

    poses = []
    intr = []
    for i in range(n):
        lo = max(i - radius, 0)
        hi = min(i + radius, n - 1)
        w = weights[lo - i + radius:hi - i + radius + 1]
        w = w / w.sum()
        center = (w[:, None] * centers[lo:hi + 1]).sum(axis=0)
        fov = float((w * fovs[lo:hi + 1]).sum())
        q_win = quats[lo:hi + 1].copy()
        signs = np.where(q_win @ q_win[0] < 0, -1.0, 1.0)
        q = (w * signs)[:, None].T @ q_win
        q = q.reshape(4)
        q = q / np.linalg.norm(q)
        poses.append(CameraPose(orthonormalize(rotmat_from_quat(q)), center))
        intr.append(seq.intrinsics[i].with_fov_v(fov))
    return CameraSequence(poses=tuple(poses), intrinsics=tuple(intr))


def _smooth_ramp(n: int) -> np.ndarray:
    """Smoothstep ramp from 0 at frame 0 to 1 at the last frame."""
    if n == 1:
        return np.ones(1)
    x = np.arange(n, dtype=np.float64) / (n - 1)
    return x * x * (3.0 - 2.0 * x)


def heuristic_source_cameras(
    target: CameraSequence,
    mode: str,
    magnitude: float,
    seed: int = 0,
    pivot: np.ndarray | None = None,
) -> CameraSequence:
    """Derive a synthetic source trajectory from a target one.

    Modes: `orbit` rotates each camera about the look-at pivot (by `magnitude`
    radians at the final frame), `offset` translates along the camera x axis,
    `dolly` moves along the view axis; all ramp smoothly from 0 to `magnitude`.
    The seed picks the motion direction sign and makes the result reproducible.
    """
    if magnitude < 0:
        raise ConfigError(f"magnitude must be >= 0, got {magnitude}")
    if mode not in ("orbit", "offset", "dolly"):
        raise ConfigError(f"unknown heuristic camera mode {mode!r}")
    rng = np.random.default_rng(seed)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    ramp = _smooth_ramp(len(target)) * magnitude
    if pivot is None:
        pivot = target.poses[0].apply(np.array([0.0, 0.0, 2.0]))
    pivot = np.asarray(pivot, dtype=np.float64)

    poses = []
    for i, pose in enumerate(target.poses):
        amount = float(ramp[i])
        if amount == 0.0:
            poses.append(pose)
            continue
        R, c = pose.rotation, pose.center
        if mode == "orbit":
            up = -R[:, 1]  # camera +y points down
            rot = rotation_about_axis(up, sign * amount)
            poses.append(CameraPose(rot @ R, rot @ (c - pivot) + pivot))
        elif mode == "offset":
            poses.append(CameraPose(R, c + sign * amount * R[:, 0]))
        else:  # dolly
            poses.append(CameraPose(R, c + sign * amount * R[:, 2]))
    return CameraSequence(poses=tuple(poses), intrinsics=target.intrinsics)


def retarget_first_frame(source_cams: CameraSequence, target_track: CameraSequence) -> CameraSequence:
    """Anchor a trajectory at the target's first frame and replay the target's
    frame-to-frame relative motion from there.

    Used to drive pipelines that assume the source and target trajectories share
    a first frame: the output starts at the target's frame 0 and each later
    frame applies the target's accumulated relative transform.
    """
    if len(source_cams) == 0 or len(target_track) == 0:
        raise EmptyInputError("both camera sequences must be non-empty")
    anchor = target_track.poses[0]
    first_inv = target_track.poses[0].inverse()
    poses = [anchor]
    for i in range(1, len(target_track)):
        rel = target_track.poses[i].compose(first_inv)
        poses.append(rel.compose(anchor))
    return CameraSequence(poses=tuple(poses), intrinsics=target_track.intrinsics)
