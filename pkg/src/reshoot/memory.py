"""Long-video explicit memory: anchor subsampling and chunkwise registration of
new reconstructions into the global persistent cloud.

Each chunk arrives in its own (scale-free) coordinate system together with a
few anchor frames whose global cameras are already known. A similarity
transform fitted on the anchor camera centers registers the chunk; new frames'
cameras and lifted points are transformed and appended.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import FramePointCloud, PersistentCloud, lift_frame
from .errors import RegistrationError, ShapeError
from .evalmetrics import SimilarityTransform, umeyama
from .trajectory import CameraSequence


@dataclass(frozen=True)
class ChunkReconstruction:
    """A jointly reconstructed chunk: anchor frames (re-reconstructed copies of
    existing global frames) plus new frames, all in chunk-local coordinates.

    anchor_map lists (local index, global frame index) pairs for the anchors.
    """

    frames: np.ndarray        # (C, H, W, 3)
    depths: np.ndarray        # (C, H, W)
    local_cams: CameraSequence
    static_masks: np.ndarray  # (C, H, W) bool
    anchor_map: tuple[tuple[int, int], ...]

    def __post_init__(self):
        c = self.frames.shape[0]
        if self.depths.shape[0] != c or self.static_masks.shape[0] != c \
                or len(self.local_cams) != c:
            raise ShapeError("chunk sequences have inconsistent lengths")
        am = tuple((int(a), int(b)) for a, b in self.anchor_map)
        if any(not 0 <= a < c for a, _ in am):
            raise ShapeError("anchor_map local index out of range")
        object.__setattr__(self, "anchor_map", am)

    @property
    def new_local_indices(self) -> list[int]:
        anchors = {a for a, _ in self.anchor_map}
        return [i for i in range(self.frames.shape[0]) if i not in anchors]


@dataclass(frozen=True)
class RegistrationRecord:
    chunk_index: int
    transform: SimilarityTransform
    mean_anchor_residual: float
    new_frames: int

    def to_dict(self) -> dict:
        return {"chunk_index": self.chunk_index,
                "transform": self.transform.to_dict(),
                "mean_anchor_residual": self.mean_anchor_residual,
                "new_frames": self.new_frames}


@dataclass(frozen=True)
class GlobalState:
    """The growing global reconstruction: persistent cloud + camera trajectory."""

    cloud: PersistentCloud
    cams: CameraSequence
    log: tuple[RegistrationRecord, ...] = ()

    def __post_init__(self):
        if self.cloud.frame_count != len(self.cams):
            raise ShapeError(f"cloud has {self.cloud.frame_count} frames, "
                             f"trajectory has {len(self.cams)}")

    @property
    def frame_count(self) -> int:
        return len(self.cams)


def subsample_anchors(existing_frame_count: int, k: int) -> list[int]:
    """k uniformly strided frame indices, always including both endpoints."""
    if existing_frame_count < 1 or k < 1:
        raise ShapeError("need existing_frame_count >= 1 and k >= 1")
    if k >= existing_frame_count:
        return list(range(existing_frame_count))
    if k == 1:
        return [0]
    x = np.linspace(0.0, existing_frame_count - 1, k)
    return [int(i) for i in np.floor(x + 0.5).astype(np.int64)]


def register_chunk(
    state: GlobalState,
    chunk: ChunkReconstruction,
    misregistration_threshold: float = 0.05,
) -> GlobalState:
    """Fit the chunk's anchor cameras to their known global cameras and append
    the chunk's new frames (cameras + lifted points) to the global state.

    The similarity fit uses anchor camera centers with free scale. A mean
    anchor residual above misregistration_threshold times the bounding-box
    diagonal of the existing camera centers aborts the registration.
    """
    if len(chunk.anchor_map) < 3:
        raise RegistrationError(
            f"need >= 3 anchors, got {len(chunk.anchor_map)}")
    for _, g in chunk.anchor_map:
        if not 0 <= g < state.frame_count:
            raise RegistrationError(f"anchor refers to unknown global frame {g}")

    src = np.stack([chunk.local_cams.poses[a].center for a, _ in chunk.anchor_map])
    dst = np.stack([state.cams.poses[g].center for _, g in chunk.anchor_map])
    try:
        S = umeyama(src, dst, with_scale=True)
    except Exception as e:
        raise RegistrationError(f"anchor fit failed: {e}") from e

    residual = float(np.linalg.norm(dst - S.apply(src), axis=1).mean())
    centers = state.cams.centers()
    diag = float(np.linalg.norm(centers.max(axis=0) - centers.min(axis=0)))
    if diag > 0 and residual > misregistration_threshold * diag:
        raise RegistrationError(
            f"mean anchor residual {residual:.4g} exceeds "
            f"{misregistration_threshold:.0%} of scene diagonal {diag:.4g}")

    # anchor frames keep their original global points; only new frames append
    base = state.frame_count
    new_poses = list(state.cams.poses)
    new_intr = list(state.cams.intrinsics)
    static_parts = [state.cloud.static_points]
    dynamic = list(state.cloud.dynamic_by_frame)
    appended = 0
    for local in chunk.new_local_indices:
        global_index = base + appended
        pose = S.apply_pose(chunk.local_cams.poses[local])
        new_poses.append(pose)
        new_intr.append(chunk.local_cams.intrinsics[local])
        cl = lift_frame(chunk.frames[local], chunk.depths[local],
                        chunk.static_masks[local],
                        chunk.local_cams.intrinsics[local],
                        chunk.local_cams.poses[local],
                        frame_index=global_index)
        cl = cl.transformed(S)
        static_parts.append(cl.subset(cl.is_static))
        dynamic.append(cl.subset(~cl.is_static))
        appended += 1

    record = RegistrationRecord(chunk_index=len(state.log), transform=S,
                                mean_anchor_residual=residual, new_frames=appended)
    return GlobalState(
        cloud=PersistentCloud(static_points=FramePointCloud.concat(static_parts),
                              dynamic_by_frame=tuple(dynamic)),
        cams=CameraSequence(poses=tuple(new_poses), intrinsics=tuple(new_intr)),
        log=state.log + (record,),
    )


# ---------------------------------------------------------------- checkpoints

def save_state(state: GlobalState, out_dir: Path) -> None:
    from .sceneio import save_cameras, save_cloud

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_cloud(state.cloud, out_dir / "cloud.ply")
    save_cameras(state.cams, out_dir / "cameras.json")
    (out_dir / "state.json").write_text(json.dumps({
        "frame_count": state.frame_count,
        "registrations": [r.to_dict() for r in state.log],
    }, indent=2))


def load_state(state_dir: Path) -> GlobalState:
    from .errors import IOFailure
    from .sceneio import load_cameras, load_cloud

    state_dir = Path(state_dir)
    meta_path = state_dir / "state.json"
    if not meta_path.exists():
        raise IOFailure(f"missing state file {meta_path}")
    meta = json.loads(meta_path.read_text())
    cloud = load_cloud(state_dir / "cloud.ply")
    cams = load_cameras(state_dir / "cameras.json")
    if meta["frame_count"] != len(cams):
        raise IOFailure(f"state declares {meta['frame_count']} frames, "
                        f"cameras.json has {len(cams)}")
    log = tuple(
        RegistrationRecord(
            chunk_index=r["chunk_index"],
            transform=SimilarityTransform.from_dict(r["transform"]),
            mean_anchor_residual=r["mean_anchor_residual"],
            new_frames=r["new_frames"],
        )
        for r in meta.get("registrations", [])
    )
    return GlobalState(cloud=cloud, cams=cams, log=log)
