"""Conditioning bundles: double-reprojection training pairs for monocular data
and (optionally persistent) multiview renders, plus bundle emit/load with
checksummed manifests.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import build_persistent, lift_frame
from .errors import IntegrityError, IOFailure, ShapeError
from .geometry import plucker_image
from .render import RenderOptions, RenderOutput, render_frame, render_video
from .sceneio import load_mask_png, load_png, save_mask_png, save_png
from .trajectory import CameraSequence

BUNDLE_VERSION = 1
PLUCKER_MAGIC = b"RPK1"


@dataclass(frozen=True)
class ReconInput:
    """A reconstructed video: frames (F,H,W,3) in [0,1], depths (F,H,W),
    per-frame cameras, and static-pixel masks (F,H,W)."""

    frames: np.ndarray
    depths: np.ndarray
    cams: CameraSequence
    static_masks: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        d = np.asarray(self.depths, dtype=np.float64)
        m = np.asarray(self.static_masks, dtype=bool)
        if f.ndim != 4 or f.shape[3] != 3:
            raise ShapeError(f"frames must be (F, H, W, 3), got {f.shape}")
        if d.shape != f.shape[:3] or m.shape != f.shape[:3]:
            raise ShapeError(f"depths {d.shape} / masks {m.shape} do not match frames {f.shape}")
        if f.shape[0] != len(self.cams):
            raise ShapeError(f"{f.shape[0]} frames vs {len(self.cams)} cameras")
        K = self.cams.intrinsics[0]
        if (f.shape[2], f.shape[1]) != (K.width, K.height):
            raise ShapeError(f"frames are {f.shape[2]}x{f.shape[1]}, "
                             f"intrinsics say {K.width}x{K.height}")
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "static_masks", m)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def lift_all(self):
        """Per-frame world-space clouds (Eq. of one point per valid-depth pixel)."""
        return [
            lift_frame(self.frames[i], self.depths[i], self.static_masks[i],
                       self.cams.intrinsics[i], self.cams.poses[i], frame_index=i)
            for i in range(len(self))
        ]


@dataclass(frozen=True)
class ConditioningBundle:
    """Everything a reshooting model is conditioned on for one video."""

    source_frames: np.ndarray          # (F, H, W, 3)
    source_alpha: np.ndarray | None    # (F, H, W) bool, holes in the source
    pc_render: np.ndarray              # (F, H, W, 3)
    pc_alpha: np.ndarray               # (F, H, W) bool
    plucker: np.ndarray                # (F, H, W, 6) float32
    target_cams: CameraSequence
    manifest: dict

    def __post_init__(self):
        F = len(self.target_cams)
        shapes = {"source_frames": self.source_frames.shape[:3],
                  "pc_render": self.pc_render.shape[:3],
                  "pc_alpha": self.pc_alpha.shape,
                  "plucker": self.plucker.shape[:3]}
        if self.source_alpha is not None:
            shapes["source_alpha"] = self.source_alpha.shape
        base = shapes["pc_render"]
        for name, s in shapes.items():
            if s != base:
                raise ShapeError(f"{name} shape {s} does not match {base}")
        if base[0] != F:
            raise ShapeError(f"{base[0]} frames vs {F} target cameras")


def _plucker_stack(cams: CameraSequence) -> np.ndarray:
    return np.stack([plucker_image(K, T).data for T, K in
                     zip(cams.poses, cams.intrinsics)]).astype(np.float32)


def double_reproject(
    target: ReconInput,
    source_cams: CameraSequence,
    opts: RenderOptions = RenderOptions(),
) -> tuple[list[RenderOutput], ConditioningBundle]:
    """Monocular pair construction: render the target video's per-frame cloud
    into heuristic source cameras, then re-render that (with its rendered
    depths) back into the target cameras to punch occlusion holes.

    Returns the intermediate source-view renders and the conditioning bundle;
    the supervision target is the original target frames.
    """
    if len(source_cams) != len(target):
        raise ShapeError(f"{len(source_cams)} source cameras vs {len(target)} frames")
    first: list[RenderOutput] = []
    second: list[RenderOutput] = []
    for i in range(len(target)):
        cl = lift_frame(target.frames[i], target.depths[i], target.static_masks[i],
                        target.cams.intrinsics[i], target.cams.poses[i], frame_index=i)
        Ts, Ks = source_cams[i]
        step1 = render_frame(cl.positions, cl.colors, Ks, Ts, opts)
        first.append(step1)
        # step 2 lifts the rendered image with its own rendered depth buffer
        # (+inf outside alpha, skipped by the lift)
        mid = lift_frame(step1.color, step1.depth, np.zeros_like(step1.alpha),
                         Ks, Ts, frame_index=i)
        Tt, Kt = target.cams[i]
        second.append(render_frame(mid.positions, mid.colors, Kt, Tt, opts))
    bundle = ConditioningBundle(
        source_frames=np.stack([r.color for r in first]),
        source_alpha=np.stack([r.alpha for r in first]),
        pc_render=np.stack([r.color for r in second]),
        pc_alpha=np.stack([r.alpha for r in second]),
        plucker=_plucker_stack(target.cams),
        target_cams=target.cams,
        manifest={"mode": "double_reprojection",
                  "params": {"point_radius": opts.point_radius,
                             "near_clip": opts.near_clip}},
    )
    return first, bundle


def multiview_condition(
    source: ReconInput,
    target_cams: CameraSequence,
    persistence: bool = True,
    opts: RenderOptions = RenderOptions(),
) -> ConditioningBundle:
    """Render the source video's cloud from genuinely different target cameras,
    optionally with the static pool persistent across frames."""
    if len(target_cams) != len(source):
        raise ShapeError(f"{len(target_cams)} target cameras vs {len(source)} frames")
    frame_clouds = source.lift_all()
    if persistence:
        cloud = build_persistent(frame_clouds)
        renders = render_video(cloud, target_cams, opts)
    else:
        renders = []
        for i in range(len(source)):
            T, K = target_cams[i]
            renders.append(render_frame(frame_clouds[i].positions,
                                        frame_clouds[i].colors, K, T, opts))
    return ConditioningBundle(
        source_frames=source.frames,
        source_alpha=None,
        pc_render=np.stack([r.color for r in renders]),
        pc_alpha=np.stack([r.alpha for r in renders]),
        plucker=_plucker_stack(target_cams),
        target_cams=target_cams,
        manifest={"mode": "multiview",
                  "params": {"persistence": persistence,
                             "point_radius": opts.point_radius,
                             "near_clip": opts.near_clip}},
    )


# ---------------------------------------------------------------- emit / load

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _save_plucker(path: Path, img: np.ndarray) -> None:
    h, w, c = img.shape
    with open(path, "wb") as f:
        f.write(PLUCKER_MAGIC)
        f.write(struct.pack("<III", w, h, c))
        f.write(np.ascontiguousarray(img, dtype="<f4").tobytes())


def _load_plucker(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if data[:4] != PLUCKER_MAGIC:
        raise IOFailure(f"bad ray-image magic in {path}")
    w, h, c = struct.unpack_from("<III", data, 4)
    return np.frombuffer(data, dtype="<f4", offset=16).reshape(h, w, c)


def emit_bundle(bundle: ConditioningBundle, out_dir: Path) -> Path:
    """Write a bundle as PNG/binary sequences plus a checksummed bundle.json.

    Colors are quantized to 8 bits on write; bundles produced by this module
    are already 8-bit-quantized, so emit/load round trips are lossless.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    F, H, W = bundle.pc_render.shape[:3]
    files: dict[str, list[str] | str] = {}
    written: list[str] = []

    def seq(kind: str, writer, count: int) -> list[str]:
        names = []
        for i in range(count):
            name = writer(i)
            names.append(name)
            written.append(name)
        return names

    files["source"] = seq("source", lambda i: _write(
        out_dir, f"source_{i:05d}.png", save_png, bundle.source_frames[i]), F)
    if bundle.source_alpha is not None:
        files["source_alpha"] = seq("source_alpha", lambda i: _write(
            out_dir, f"source_alpha_{i:05d}.png", save_mask_png, bundle.source_alpha[i]), F)
    files["pc_render"] = seq("pc_render", lambda i: _write(
        out_dir, f"render_{i:05d}.png", save_png, bundle.pc_render[i]), F)
    files["pc_alpha"] = seq("pc_alpha", lambda i: _write(
        out_dir, f"alpha_{i:05d}.png", save_mask_png, bundle.pc_alpha[i]), F)
    files["plucker"] = seq("plucker", lambda i: _write(
        out_dir, f"plucker_{i:05d}.bin", _save_plucker, bundle.plucker[i]), F)
    (out_dir / "cameras.json").write_text(bundle.target_cams.to_json())
    files["cameras"] = "cameras.json"
    written.append("cameras.json")

    manifest = {
        "version": BUNDLE_VERSION,
        "frames": F, "width": W, "height": H,
        "files": files,
        "checksums": {name: _sha256(out_dir / name) for name in written},
        "provenance": bundle.manifest,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = out_dir / "bundle.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _write(out_dir: Path, name: str, writer, arr) -> str:
    try:
        writer(out_dir / name, arr)
    except OSError as e:
        raise IOFailure(f"failed writing {out_dir / name}: {e}") from e
    return name


def load_bundle(bundle_dir: Path) -> ConditioningBundle:
    """Re-load an emitted bundle, verifying every file checksum."""
    bundle_dir = Path(bundle_dir)
    path = bundle_dir / "bundle.json"
    if not path.exists():
        raise IOFailure(f"missing bundle manifest {path}")
    m = json.loads(path.read_text())
    for name, digest in m["checksums"].items():
        fp = bundle_dir / name
        if not fp.exists():
            raise IOFailure(f"bundle file missing: {fp}")
        if _sha256(fp) != digest:
            raise IntegrityError(f"checksum mismatch for {fp}")
    files = m["files"]
    source = np.stack([load_png(bundle_dir / n) for n in files["source"]])
    source_alpha = None
    if "source_alpha" in files:
        source_alpha = np.stack([load_mask_png(bundle_dir / n) for n in files["source_alpha"]])
    pc_render = np.stack([load_png(bundle_dir / n) for n in files["pc_render"]])
    pc_alpha = np.stack([load_mask_png(bundle_dir / n) for n in files["pc_alpha"]])
    plucker = np.stack([_load_plucker(bundle_dir / n) for n in files["plucker"]])
    from .sceneio import load_cameras
    cams = load_cameras(bundle_dir / files["cameras"])
    return ConditioningBundle(source_frames=source, source_alpha=source_alpha,
                              pc_render=pc_render, pc_alpha=pc_alpha,
                              plucker=plucker, target_cams=cams,
                              manifest=m["provenance"])
