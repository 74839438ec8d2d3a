"""Trajectory alignment and camera-accuracy / pixel-fidelity metrics.

Alignment is closed-form least-squares over similarity transforms (Umeyama);
camera errors are per-frame rotation geodesics, squared center distances, and
vertical-FOV differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RankError, ShapeError, UndefinedMetricError
from .geometry import CameraPose, orthonormalize
from .trajectory import CameraSequence


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * rotation @ p + translation."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not self.scale > 0:
            raise ShapeError(f"scale must be positive, got {self.scale}")
        R = np.ascontiguousarray(self.rotation, dtype=np.float64)
        t = np.ascontiguousarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise ShapeError("rotation is not a 3x3 orthonormal matrix")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return self.scale * (p @ self.rotation.T) + self.translation

    def apply_pose(self, pose: CameraPose) -> CameraPose:
        """Transform a camera pose: center mapped, rotation left-multiplied."""
        return CameraPose(orthonormalize(self.rotation @ pose.rotation),
                          self.apply(pose.center))

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """(self ∘ other)(p) = self(other(p))."""
        return SimilarityTransform(
            self.scale * other.scale,
            orthonormalize(self.rotation @ other.rotation),
            self.scale * (self.rotation @ other.translation) + self.translation,
        )

    def inverse(self) -> "SimilarityTransform":
        Rinv = self.rotation.T
        return SimilarityTransform(1.0 / self.scale, Rinv,
                                   -(Rinv @ self.translation) / self.scale)

    def to_dict(self) -> dict:
        return {"scale": self.scale,
                "rotation": self.rotation.reshape(9).tolist(),
                "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SimilarityTransform":
        return cls(float(d["scale"]),
                   np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
                   np.asarray(d["translation"], dtype=np.float64))


def umeyama(src: np.ndarray, dst: np.ndarray, with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity transform mapping src points onto dst points.

    Minimizes sum ||dst_i - (s R src_i + t)||^2; the returned rotation always
    has det +1 (reflections are not allowed). with_scale=False fixes s = 1.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ShapeError(f"need matching (N, 3) point sets, got {src.shape} vs {dst.shape}")
    n = src.shape[0]
    if n < 3:
        raise RankError(f"need at least 3 correspondences, got {n}")
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    src_c = src - mu_src
    dst_c = dst - mu_dst
    cov = dst_c.T @ src_c / n
    var_src = (src_c ** 2).sum() / n
    U, S, Vt = np.linalg.svd(cov)
    if np.linalg.matrix_rank(src_c) < 2:
        raise RankError("source points are collinear or coincident")
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    D = np.diag([1.0, 1.0, d])
    R = U @ D @ Vt
    if with_scale:
        if var_src <= 0:
            raise RankError("source points are coincident")
        s = float(np.trace(np.diag(S) @ D) / var_src)
        if s <= 0:
            raise RankError("degenerate configuration produced non-positive scale")
    else:
        s = 1.0
    t = mu_dst - s * (R @ mu_src)
    return SimilarityTransform(s, orthonormalize(R), t)


def align_trajectories(
    pred: CameraSequence,
    anchor_pred: list[int],
    anchor_gt: CameraSequence,
) -> CameraSequence:
    """Fit pred's anchor camera centers to anchor_gt's and transform all of pred.

    anchor_pred indexes into pred; anchor_gt lists the corresponding ground
    truth cameras in the same order.
    """
    if len(anchor_pred) != len(anchor_gt):
        raise ShapeError(f"{len(anchor_pred)} anchor indices vs {len(anchor_gt)} gt cameras")
    src = np.stack([pred.poses[i].center for i in anchor_pred])
    dst = anchor_gt.centers()
    S = umeyama(src, dst, with_scale=True)
    return CameraSequence(
        poses=tuple(S.apply_pose(p) for p in pred.poses),
        intrinsics=pred.intrinsics,
    )


@dataclass(frozen=True)
class CameraErrorReport:
    rot_err: float        # mean, radians
    trans_err: float      # mean squared center distance, world units^2
    intr_err: float       # mean |delta vertical FOV|, degrees
    rot_err_per_frame: np.ndarray
    trans_err_per_frame: np.ndarray
    intr_err_per_frame: np.ndarray

    @property
    def rot_err_deg(self) -> float:
        return math.degrees(self.rot_err)

    def to_dict(self) -> dict:
        return {
            "rot_err_rad": self.rot_err,
            "rot_err_deg": self.rot_err_deg,
            "trans_err": self.trans_err,
            "intr_err_deg": self.intr_err,
            "per_frame": [
                {"frame": i,
                 "rot_err_deg": math.degrees(float(r)),
                 "trans_err": float(t),
                 "fov_err_deg": float(f)}
                for i, (r, t, f) in enumerate(
                    zip(self.rot_err_per_frame, self.trans_err_per_frame,
                        self.intr_err_per_frame))
            ],
        }

    def to_table(self) -> str:
        """Fixed-column text table with per-frame rows and mean footer."""
        lines = [f"{'frame':>6} {'rot_err_deg':>12} {'trans_err':>12} {'fov_err_deg':>12}"]
        for i, (r, t, f) in enumerate(zip(self.rot_err_per_frame,
                                          self.trans_err_per_frame,
                                          self.intr_err_per_frame)):
            lines.append(f"{i:>6d} {math.degrees(float(r)):>12.6f} "
                         f"{float(t):>12.6f} {float(f):>12.6f}")
        lines.append(f"{'mean':>6} {self.rot_err_deg:>12.6f} "
                     f"{self.trans_err:>12.6f} {self.intr_err:>12.6f}")
        return "\n".join(lines)


def camera_errors(gen: CameraSequence, tgt: CameraSequence) -> CameraErrorReport:
    """Per-frame rotation/translation/intrinsics error between two trajectories.

    Rotation error is the geodesic angle arccos((tr(R_tgt R_gen^T) - 1) / 2)
    with the argument clamped to [-1, 1]; translation error is the squared L2
    distance between camera centers; intrinsics error is the absolute vertical
    FOV difference in degrees.
    """
    if len(gen) != len(tgt):
        raise ShapeError(f"trajectory lengths differ: {len(gen)} vs {len(tgt)}")
    rot = np.empty(len(gen))
    trans = np.empty(len(gen))
    intr = np.empty(len(gen))
    for i in range(len(gen)):
        Rg, Rt = gen.poses[i].rotation, tgt.poses[i].rotation
        arg = (np.trace(Rt @ Rg.T) - 1.0) / 2.0
        rot[i] = math.acos(min(1.0, max(-1.0, arg)))
        trans[i] = float(((tgt.poses[i].center - gen.poses[i].center) ** 2).sum())
        intr[i] = abs(tgt.intrinsics[i].fov_v_deg - gen.intrinsics[i].fov_v_deg)
    return CameraErrorReport(
        rot_err=float(rot.mean()), trans_err=float(trans.mean()),
        intr_err=float(intr.mean()),
        rot_err_per_frame=rot, trans_err_per_frame=trans, intr_err_per_frame=intr,
    )


def masked_psnr(gen: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """PSNR (peak 1.0) over masked pixels of an image or image sequence.

    gen/gt are (..., H, W, 3) in [0, 1]; mask is (..., H, W) boolean. Returns
    inf when the masked regions agree exactly.
    """
    gen = np.asarray(gen, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if gen.shape != gt.shape:
        raise ShapeError(f"image shapes differ: {gen.shape} vs {gt.shape}")
    if mask.shape != gen.shape[:-1]:
        raise ShapeError(f"mask shape {mask.shape} does not match images {gen.shape}")
    if not mask.any():
        raise UndefinedMetricError("mask selects no pixels")
    diff = (gen - gt)[mask]
    mse = float((diff ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
