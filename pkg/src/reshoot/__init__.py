"""Toolkit for 4D point-cloud video reshooting pipelines: lifting RGB-D video
to world-space clouds, temporally-persistent rendering, camera trajectory
design, conditioning-bundle generation, and trajectory evaluation."""

from .cloud import (
    EditOp,
    FramePointCloud,
    PersistentCloud,
    build_persistent,
    edit_cloud,
    lift_frame,
    merge_clouds,
)
from .datagen import ConditioningBundle, ReconInput, double_reproject, emit_bundle, load_bundle, multiview_condition
from .evalmetrics import CameraErrorReport, SimilarityTransform, align_trajectories, camera_errors, masked_psnr, umeyama
from .geometry import CameraIntrinsics, CameraPose, PluckerImage, cam_to_world, plucker_image, project, unproject, world_to_cam
from .memory import ChunkReconstruction, GlobalState, register_chunk, subsample_anchors
from .render import RenderOptions, RenderOutput, render_frame, render_video
from .trajectory import (
    CameraKeyframe,
    CameraSequence,
    KeyframeTrack,
    gaussian_smooth,
    heuristic_source_cameras,
    interpolate_track,
    retarget_first_frame,
)

__version__ = "0.1.0"
