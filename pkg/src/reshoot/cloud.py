"""World-space point clouds: per-frame lifting, temporal persistence for static
pixels, merging, and editing.

A FramePointCloud is a struct-of-arrays bundle; a PersistentCloud keeps one
shared static pool (aggregated over all frames) plus per-frame dynamic points.
The visible set of frame i is the static pool followed by that frame's dynamic
points; that ordering is the canonical point order the renderer's tie rule
refers to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyInputError, ShapeError
from .evalmetrics import SimilarityTransform
from .geometry import CameraIntrinsics, CameraPose, unproject_grid


@dataclass(frozen=True)
class FramePointCloud:
    """Colored world-space points with per-point provenance.

    positions: (N, 3) float64; colors: (N, 3) float64 in [0, 1];
    is_static: (N,) bool; frame_index/u/v: (N,) provenance of the source pixel;
    source: (N,) tag distinguishing merged clouds (0 = original).
    """

    positions: np.ndarray
    colors: np.ndarray
    is_static: np.ndarray
    frame_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    source: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = pos.shape[0]
        col = np.ascontiguousarray(self.colors, dtype=np.float64).reshape(-1, 3)
        stat = np.ascontiguousarray(self.is_static, dtype=bool).reshape(-1)
        fi = np.ascontiguousarray(self.frame_index, dtype=np.int64).reshape(-1)
        u = np.ascontiguousarray(self.u, dtype=np.int64).reshape(-1)
        v = np.ascontiguousarray(self.v, dtype=np.int64).reshape(-1)
        src = np.ascontiguousarray(self.source, dtype=np.int64).reshape(-1)
        for name, a in (("colors", col), ("is_static", stat), ("frame_index", fi),
                        ("u", u), ("v", v), ("source", src)):
            if len(a) != n:
                raise ShapeError(f"{name} has {len(a)} entries for {n} points")
        if n and not np.all(np.isfinite(pos)):
            raise ShapeError("positions contain non-finite values")
        for a in (pos, col, stat, fi, u, v, src):
            a.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "is_static", stat)
        object.__setattr__(self, "frame_index", fi)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "source", src)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def empty(cls) -> "FramePointCloud":
        z = np.zeros((0,))
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), z.astype(bool),
                   z.astype(np.int64), z.astype(np.int64), z.astype(np.int64),
                   z.astype(np.int64))

    def subset(self, mask: np.ndarray) -> "FramePointCloud":
        return FramePointCloud(self.positions[mask], self.colors[mask],
                               self.is_static[mask], self.frame_index[mask],
                               self.u[mask], self.v[mask], self.source[mask])

    def transformed(self, t: SimilarityTransform) -> "FramePointCloud":
        return FramePointCloud(t.apply(self.positions), self.colors, self.is_static,
                               self.frame_index, self.u, self.v, self.source)

    def with_source(self, tag: int) -> "FramePointCloud":
        return FramePointCloud(self.positions, self.colors, self.is_static,
                               self.frame_index, self.u, self.v,
                               np.full(len(self), tag, dtype=np.int64))

    @staticmethod
    def concat(clouds: Sequence["FramePointCloud"]) -> "FramePointCloud":
        clouds = list(clouds)
        if not clouds:
            return FramePointCloud.empty()
        return FramePointCloud(
            np.concatenate([c.positions for c in clouds]),
            np.concatenate([c.colors for c in clouds]),
            np.concatenate([c.is_static for c in clouds]),
            np.concatenate([c.frame_index for c in clouds]),
            np.concatenate([c.u for c in clouds]),
            np.concatenate([c.v for c in clouds]),
            np.concatenate([c.source for c in clouds]),
        )


@dataclass(frozen=True)
class PersistentCloud:
    """Static pool shared by all frames + per-frame dynamic points."""

    static_points: FramePointCloud
    dynamic_by_frame: tuple[FramePointCloud, ...]

    def __post_init__(self):
        dyn = tuple(self.dynamic_by_frame)
        if self.static_points.is_static.size and not self.static_points.is_static.all():
            raise ShapeError("static pool contains points flagged dynamic")
        object.__setattr__(self, "dynamic_by_frame", dyn)

    @property
    def frame_count(self) -> int:
        return len(self.dynamic_by_frame)

    def visible_set(self, frame: int) -> FramePointCloud:
        """Points visible at a frame: static pool first, then its dynamic points."""
        return FramePointCloud.concat([self.static_points, self.dynamic_by_frame[frame]])

    def total_points(self) -> int:
        return len(self.static_points) + sum(len(d) for d in self.dynamic_by_frame)

    def all_points(self) -> FramePointCloud:
        return FramePointCloud.concat([self.static_points, *self.dynamic_by_frame])


def lift_frame(
    image: np.ndarray,
    depth: np.ndarray,
    mask: np.ndarray,
    K: CameraIntrinsics,
    T: CameraPose,
    frame_index: int = 0,
) -> FramePointCloud:
    """Lift one RGB-D frame into a world-space cloud, one point per valid pixel.

    Invalid depths (<= 0, NaN, inf) produce no point. The static flag is copied
    from the mask; provenance records (frame_index, u, v).
    """
    image = np.asarray(image, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    h, w = depth.shape
    if image.shape != (h, w, 3):
        raise ShapeError(f"image shape {image.shape} vs depth {depth.shape}")
    if mask.shape != (h, w):
        raise ShapeError(f"mask shape {mask.shape} vs depth {depth.shape}")
    if (w, h) != (K.width, K.height):
        raise ShapeError(f"frame {w}x{h} does not match intrinsics {K.width}x{K.height}")
    valid = np.isfinite(depth) & (depth > 0)
    cam_pts = unproject_grid(np.where(valid, depth, 1.0), K)[valid]
    vv, uu = np.nonzero(valid)
    return FramePointCloud(
        positions=T.apply(cam_pts),
        colors=image[valid],
        is_static=mask[valid],
        frame_index=np.full(len(cam_pts), frame_index, dtype=np.int64),
        u=uu.astype(np.int64),
        v=vv.astype(np.int64),
        source=np.zeros(len(cam_pts), dtype=np.int64),
    )


def voxel_dedup(cloud: FramePointCloud, edge: float) -> FramePointCloud:
    """Keep the first point of each occupied voxel of the given edge length."""
    if len(cloud) == 0 or edge <= 0:
        return cloud
    keys = np.floor(cloud.positions / edge).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return cloud.subset(np.sort(first))


def build_persistent(
    frames: Sequence[FramePointCloud],
    dedup_voxel: float | None = None,
) -> PersistentCloud:
    """Aggregate static points over all frames into a persistent pool.

    No deduplication by default (z-buffering resolves overlaps); pass a voxel
    edge to opt into grid dedup of the static pool.
    """
    frames = list(frames)
    if not frames:
        raise EmptyInputError("need at least one frame cloud")
    static = FramePointCloud.concat([f.subset(f.is_static) for f in frames])
    if dedup_voxel is not None:
        static = voxel_dedup(static, dedup_voxel)
    dynamic = tuple(f.subset(~f.is_static) for f in frames)
    return PersistentCloud(static_points=static, dynamic_by_frame=dynamic)


def merge_clouds(
    a: PersistentCloud,
    b: PersistentCloud,
    align: SimilarityTransform | None = None,
) -> PersistentCloud:
    """Fuse two persistent clouds; `align` maps b into a's coordinates first.

    Dynamic lists are index-aligned (missing frames treated as empty); b's
    points get a fresh source tag above a's largest.
    """
    tag = int(a.all_points().source.max(initial=-1)) + 1

    def prep(c: FramePointCloud) -> FramePointCloud:
        c = c.with_source(tag)
        return c.transformed(align) if align is not None else c

    static = FramePointCloud.concat([a.static_points, prep(b.static_points)])
    n = max(a.frame_count, b.frame_count)
    dynamic = []
    for i in range(n):
        da = a.dynamic_by_frame[i] if i < a.frame_count else FramePointCloud.empty()
        db = prep(b.dynamic_by_frame[i]) if i < b.frame_count else FramePointCloud.empty()
        dynamic.append(FramePointCloud.concat([da, db]))
    return PersistentCloud(static_points=static, dynamic_by_frame=tuple(dynamic))


@dataclass(frozen=True)
class EditOp:
    """One cloud edit: select points with a predicate, then act on them.

    select: callable(FramePointCloud) -> boolean mask over its points.
    action: "delete", "transform", or "duplicate"; the latter two take a
    similarity transform. Duplicated points get a fresh source tag.
    """

    select: Callable[[FramePointCloud], np.ndarray]
    action: str
    transform: SimilarityTransform | None = None

    def __post_init__(self):
        if self.action not in ("delete", "transform", "duplicate"):
            raise ShapeError(f"unknown edit action {self.action!r}")
        if self.action in ("transform", "duplicate") and self.transform is None:
            raise ShapeError(f"action {self.action!r} requires a transform")


def _apply_op(part: FramePointCloud, op: EditOp, fresh_tag: int) -> FramePointCloud:
    mask = np.asarray(op.select(part), dtype=bool).reshape(-1)
    if mask.shape[0] != len(part):
        raise ShapeError("edit predicate returned a mask of the wrong length")
    if op.action == "delete":
        return part.subset(~mask)
    if op.action == "transform":
        pos = part.positions.copy()
        pos[mask] = op.transform.apply(part.positions[mask])
        return FramePointCloud(pos, part.colors, part.is_static, part.frame_index,
                               part.u, part.v, part.source)
    dup = part.subset(mask).transformed(op.transform).with_source(fresh_tag)
    return FramePointCloud.concat([part, dup])


def edit_cloud(cloud: PersistentCloud, ops: Sequence[EditOp]) -> PersistentCloud:
    """Apply edit operations in order to the static pool and every dynamic frame."""
    static = cloud.static_points
    dynamic = list(cloud.dynamic_by_frame)
    tag = int(cloud.all_points().source.max(initial=-1)) + 1
    for op in ops:
        static = _apply_op(static, op, tag)
        dynamic = [_apply_op(d, op, tag) for d in dynamic]
        if op.action == "duplicate":
            tag += 1
    return PersistentCloud(static_points=static, dynamic_by_frame=tuple(dynamic))
