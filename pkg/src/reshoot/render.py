"""Z-buffered point-splat rasterizer.

Each point splats a square of side 2*radius+1 centered on its rounded projected
pixel; per pixel the candidate with the smallest (depth, canonical index) wins,
where the canonical index is the point's position in the visible set (static
pool order, then dynamic order). This makes output independent of the internal
evaluation schedule and lets a brute-force oracle reproduce it bit-exactly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import minimum_filter

from .cloud import PersistentCloud
from .errors import ShapeError
from .geometry import CameraIntrinsics, CameraPose, project_points
from .trajectory import CameraSequence

_NO_POINT = np.int64(1) << 62


@dataclass(frozen=True)
class RenderOptions:
    point_radius: int = 0           # splat half-width in pixels
    near_clip: float = 1e-6
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.point_radius < 0:
            raise ShapeError(f"point_radius must be >= 0, got {self.point_radius}")
        if not self.near_clip > 0:
            raise ShapeError(f"near_clip must be > 0, got {self.near_clip}")


@dataclass(frozen=True)
class RenderOutput:
    color: np.ndarray   # (H, W, 3) float64 in [0, 1]
    alpha: np.ndarray   # (H, W) bool
    depth: np.ndarray   # (H, W) float64, +inf where alpha is false

    def __post_init__(self):
        if self.color.shape[:2] != self.alpha.shape or self.alpha.shape != self.depth.shape:
            raise ShapeError("render buffers have inconsistent shapes")


def render_frame(
    points: np.ndarray,
    colors: np.ndarray,
    K: CameraIntrinsics,
    T: CameraPose,
    opts: RenderOptions = RenderOptions(),
) -> RenderOutput:
    """Rasterize world-space points into a camera."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    if len(points) != len(colors):
        raise ShapeError(f"{len(points)} points vs {len(colors)} colors")
    h, w = K.height, K.width
    r = opts.point_radius

    if len(points) == 0:
        return _empty_output(h, w, opts)

    cam = T.inverse_apply(points)
    uv, z = project_points(cam, K)
    # round half up; np.round would banker-round .5 cases
    px = np.floor(uv[:, 0] + 0.5).astype(np.int64)
    py = np.floor(uv[:, 1] + 0.5).astype(np.int64)
    in_view = (z > opts.near_clip) & (px >= -r) & (px <= w - 1 + r) \
        & (py >= -r) & (py <= h - 1 + r) & np.isfinite(uv).all(axis=1)
    idx = np.flatnonzero(in_view)
    if idx.size == 0:
        return _empty_output(h, w, opts)

    zv = z[idx]
    # rank candidates by (depth, canonical index); winner per pixel = min rank
    order = np.lexsort((idx, zv))
    ranked = idx[order]                      # original index by rank
    rank_of = np.empty(idx.size, dtype=np.int64)
    rank_of[order] = np.arange(idx.size)

    # padded rank image so footprints whose center lies off-image still count
    pw, ph = w + 2 * r, h + 2 * r
    pix = (py[idx] + r) * pw + (px[idx] + r)
    packed = (pix.astype(np.uint64) << np.uint64(32)) | rank_of.astype(np.uint64)
    packed.sort()
    pix_sorted = (packed >> np.uint64(32)).astype(np.int64)
    first = np.ones(len(packed), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    rank_img = np.full(ph * pw, _NO_POINT, dtype=np.int64)
    rank_img[pix_sorted[first]] = (packed[first] & np.uint64(0xFFFFFFFF)).astype(np.int64)
    rank_img = rank_img.reshape(ph, pw)

    if r > 0:
        rank_img = minimum_filter(rank_img, size=2 * r + 1, mode="constant", cval=_NO_POINT)
        rank_img = rank_img[r:r + h, r:r + w]
    # with r == 0 the padded image is already h x w

    alpha = rank_img != _NO_POINT
    winner = np.where(alpha, rank_img, 0)
    win_pts = ranked[winner]
    color = np.where(alpha[..., None], colors[win_pts],
                     np.asarray(opts.background, dtype=np.float64))
    depth = np.where(alpha, z[win_pts], np.inf)
    return RenderOutput(color=color, alpha=alpha, depth=depth)


def _empty_output(h: int, w: int, opts: RenderOptions) -> RenderOutput:
    color = np.broadcast_to(np.asarray(opts.background, dtype=np.float64), (h, w, 3)).copy()
    return RenderOutput(color=color, alpha=np.zeros((h, w), dtype=bool),
                        depth=np.full((h, w), np.inf))


def _thread_count() -> int:
    env = os.environ.get("RESHOOT_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def render_video(
    cloud: PersistentCloud,
    cams: CameraSequence,
    opts: RenderOptions = RenderOptions(),
    frame_map: list[int] | None = None,
) -> list[RenderOutput]:
    """Render each camera against the cloud's visible set of its frame.

    frame_map gives the cloud frame for each camera; by default camera i
    renders visible_set(i) and the lengths must agree.
    """
    if frame_map is None:
        if len(cams) != cloud.frame_count:
            raise ShapeError(
                f"{len(cams)} cameras vs {cloud.frame_count} cloud frames; "
                "pass frame_map to render with differing lengths")
        frame_map = list(range(len(cams)))
    elif len(frame_map) != len(cams):
        raise ShapeError(f"frame_map has {len(frame_map)} entries for {len(cams)} cameras")

    def one(i: int) -> RenderOutput:
        vis = cloud.visible_set(frame_map[i])
        T, K = cams[i]
        return render_frame(vis.positions, vis.colors, K, T, opts)

    workers = _thread_count()
    if workers == 1 or len(cams) == 1:
        return [one(i) for i in range(len(cams))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(cams))))
