"""Command line entry point orchestrating the pipeline end to end.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numeric/registration
failure. Progress goes to stderr; machine-readable results go to stdout or
--out. All randomized behavior is seeded (default 0) and the seed is printed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import datagen as dg
from . import memory as mem
from . import sceneio
from .cloud import FramePointCloud, PersistentCloud, build_persistent
from .errors import IOFailure, NumericFailure, ValidationError
from .evalmetrics import align_trajectories, camera_errors, masked_psnr
from .render import RenderOptions, render_video
from .trajectory import CameraSequence, KeyframeTrack, gaussian_smooth, heuristic_source_cameras, interpolate_track


def _progress(msg: str) -> None:
    click.echo(msg, err=True)


def _emit_json(data, out: str | None) -> None:
    text = json.dumps(data, indent=2)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text)


class _ExitCode(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _wrap(fn):
    """Map toolkit exceptions to the documented exit codes."""

    def run(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as e:
            raise _ExitCode(str(e), 1) from e
        except IOFailure as e:
            raise _ExitCode(str(e), 2) from e
        except NumericFailure as e:
            raise _ExitCode(str(e), 3) from e
        except OSError as e:
            raise _ExitCode(str(e), 2) from e

    run.__name__ = fn.__name__
    return run


@click.group()
def main():
    """4D point-cloud video reshooting toolkit."""


def _load_track_cameras(track: str | None, cameras: str | None,
                        base_camera: str | None, smooth_sigma: float | None) -> CameraSequence:
    if (track is None) == (cameras is None):
        raise ValidationError("provide exactly one of --track or --cameras")
    if track is not None:
        if base_camera is None:
            raise ValidationError("--track requires --base-camera for image size/aspect")
        base = sceneio.load_cameras(base_camera).intrinsics[0]
        kt = KeyframeTrack.from_json(Path(track).read_text())
        seq = interpolate_track(kt, base)
    else:
        seq = sceneio.load_cameras(cameras)
    if smooth_sigma:
        seq = gaussian_smooth(seq, smooth_sigma)
    return seq


@main.command()
@click.option("--scene", required=True, help="Path to scene.json manifest.")
@click.option("--out", "out_path", required=True, help="Output cloud PLY.")
@click.option("--dry-run", is_flag=True, help="Validate inputs, write nothing.")
@_wrap
def lift(scene, out_path, dry_run):
    """Lift a scene's frames to per-frame world-space clouds (one PLY)."""
    recon = sceneio.load_scene(scene)
    clouds = recon.lift_all()
    result = PersistentCloud(static_points=FramePointCloud.empty(),
                             dynamic_by_frame=tuple(clouds))
    _progress(f"lifted {len(clouds)} frames, {result.total_points()} points")
    if dry_run:
        _progress("dry run: not writing")
        return
    sceneio.save_cloud(result, Path(out_path))
    _progress(f"wrote {out_path}")


@main.command()
@click.option("--cloud", "cloud_path", required=True, help="Per-frame cloud PLY from `lift`.")
@click.option("--out", "out_path", required=True, help="Output persistent cloud PLY.")
@click.option("--dedup-voxel", type=float, default=None,
              help="Optional voxel edge for static-pool deduplication (world units).")
@click.option("--dry-run", is_flag=True)
@_wrap
def persist(cloud_path, out_path, dedup_voxel, dry_run):
    """Aggregate static points across frames into a persistent cloud."""
    per_frame = sceneio.load_cloud(cloud_path)
    flat = per_frame.all_points()
    frames = [flat.subset(flat.frame_index == i) for i in range(per_frame.frame_count)]
    result = build_persistent(frames, dedup_voxel=dedup_voxel)
    _progress(f"static pool {len(result.static_points)} points over "
              f"{result.frame_count} frames")
    if dry_run:
        _progress("dry run: not writing")
        return
    sceneio.save_cloud(result, Path(out_path))
    _progress(f"wrote {out_path}")


@main.command()
@click.option("--cloud", "cloud_path", required=True, help="Cloud PLY.")
@click.option("--track", default=None, help="KeyframeTrack JSON.")
@click.option("--cameras", default=None, help="Dense camera JSON.")
@click.option("--base-camera", default=None, help="Camera JSON supplying base intrinsics for --track.")
@click.option("--smooth-sigma", type=float, default=None, help="Gaussian smoothing sigma (frames).")
@click.option("--radius", type=int, default=0, help="Splat radius in pixels.")
@click.option("--near-clip", type=float, default=1e-6)
@click.option("--write-depth", is_flag=True, help="Also write float depth binaries.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--dry-run", is_flag=True)
@_wrap
def render(cloud_path, track, cameras, base_camera, smooth_sigma, radius,
           near_clip, write_depth, out_dir, dry_run):
    """Render a cloud along a camera path to PNG sequences."""
    cloud = sceneio.load_cloud(cloud_path)
    cams = _load_track_cameras(track, cameras, base_camera, smooth_sigma)
    opts = RenderOptions(point_radius=radius, near_clip=near_clip)
    frame_map = None
    if len(cams) != cloud.frame_count:
        if cloud.frame_count == 1:
            frame_map = [0] * len(cams)
        else:
            raise ValidationError(
                f"camera path has {len(cams)} frames but cloud has "
                f"{cloud.frame_count}; lengths must match")
    if dry_run:
        _progress(f"dry run: would render {len(cams)} frames to {out_dir}")
        return
    outputs = render_video(cloud, cams, opts, frame_map=frame_map)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, ro in enumerate(outputs):
        sceneio.save_png(out / f"render_{i:05d}.png", ro.color)
        sceneio.save_mask_png(out / f"alpha_{i:05d}.png", ro.alpha)
        if write_depth:
            sceneio.save_render_depth(out / f"depth_{i:05d}.bin", ro.depth, i)
    _progress(f"rendered {len(outputs)} frames to {out_dir}")


@main.command(name="datagen")
@click.option("--scene", required=True, help="Scene manifest of the reconstructed video.")
@click.option("--mode", type=click.Choice(["double_reprojection", "multiview"]), required=True)
@click.option("--target-track", default=None, help="KeyframeTrack JSON for multiview targets.")
@click.option("--target-cameras", default=None, help="Dense camera JSON for multiview targets.")
@click.option("--heuristic", type=click.Choice(["orbit", "offset", "dolly"]), default="orbit",
              help="Source-camera heuristic for double reprojection.")
@click.option("--magnitude", type=float, default=0.35)
@click.option("--seed", type=int, default=0)
@click.option("--persistence/--no-persistence", default=True)
@click.option("--radius", type=int, default=0)
@click.option("--out", "out_dir", required=True)
@click.option("--dry-run", is_flag=True)
@_wrap
def datagen_cmd(scene, mode, target_track, target_cameras, heuristic,
                magnitude, seed, persistence, radius, out_dir, dry_run):
    """Produce a conditioning bundle from a reconstructed scene."""
    recon = sceneio.load_scene(scene)
    opts = RenderOptions(point_radius=radius)
    if mode == "double_reprojection":
        _progress(f"heuristic source cameras: {heuristic}, magnitude {magnitude}, seed {seed}")
        source_cams = heuristic_source_cameras(recon.cams, heuristic, magnitude, seed=seed)
        if dry_run:
            _progress("dry run: inputs valid, not writing")
            return
        _, bundle = dg.double_reproject(recon, source_cams, opts)
    else:
        if target_cameras is not None:
            cams = sceneio.load_cameras(target_cameras)
        elif target_track is not None:
            kt = KeyframeTrack.from_json(Path(target_track).read_text())
            cams = interpolate_track(kt, recon.cams.intrinsics[0])
        else:
            raise ValidationError("multiview mode needs --target-cameras or --target-track")
        if dry_run:
            _progress("dry run: inputs valid, not writing")
            return
        bundle = dg.multiview_condition(recon, cams, persistence=persistence, opts=opts)
    manifest = dg.emit_bundle(bundle, Path(out_dir))
    _progress(f"wrote bundle manifest {manifest}")


@main.command(name="eval")
@click.option("--gen", "gen_path", default=None, help="Generated camera JSON.")
@click.option("--tgt", "tgt_path", default=None, help="Target camera JSON.")
@click.option("--align-anchors", type=int, default=0,
              help="Align with this many leading frames as anchors before scoring.")
@click.option("--gen-dir", default=None, help="Generated render_%05d.png directory.")
@click.option("--gt-dir", default=None, help="Ground-truth render directory.")
@click.option("--mask-dir", default=None, help="alpha_%05d.png mask directory (optional).")
@click.option("--frames", type=int, default=None, help="Frame count for image metrics.")
@click.option("--out", default=None, help="Write the JSON report here instead of stdout.")
@_wrap
def eval_cmd(gen_path, tgt_path, align_anchors, gen_dir, gt_dir, mask_dir, frames, out):
    """Camera-accuracy report between two trajectories, or masked PSNR
    between two render directories."""
    if gen_path and tgt_path:
        gen = sceneio.load_cameras(gen_path)
        tgt = sceneio.load_cameras(tgt_path)
        if align_anchors:
            anchors = list(range(min(align_anchors, len(gen))))
            anchor_gt = CameraSequence(
                poses=tuple(tgt.poses[i] for i in anchors),
                intrinsics=tuple(tgt.intrinsics[i] for i in anchors))
            gen = align_trajectories(gen, anchors, anchor_gt)
        report = camera_errors(gen, tgt)
        _progress(report.to_table())
        _emit_json(report.to_dict(), out)
        return
    if gen_dir and gt_dir:
        if frames is None:
            raise ValidationError("--frames is required for image metrics")
        gen_seq, gt_seq, masks = [], [], []
        for i in range(frames):
            gen_seq.append(sceneio.load_png(Path(gen_dir) / f"render_{i:05d}.png"))
            gt_seq.append(sceneio.load_png(Path(gt_dir) / f"render_{i:05d}.png"))
            if mask_dir:
                masks.append(sceneio.load_mask_png(Path(mask_dir) / f"alpha_{i:05d}.png"))
        gen_arr, gt_arr = np.stack(gen_seq), np.stack(gt_seq)
        mask = np.stack(masks) if masks else np.ones(gen_arr.shape[:3], dtype=bool)
        value = masked_psnr(gen_arr, gt_arr, mask)
        _emit_json({"masked_psnr_db": "inf" if value == float("inf") else value}, out)
        return
    raise ValidationError("provide --gen/--tgt for cameras or --gen-dir/--gt-dir for renders")


@main.command(name="memory")
@click.option("--state", "state_dir", required=True, help="Global state directory.")
@click.option("--init-scene", default=None, help="Initialize the state from this scene manifest.")
@click.option("--chunk-scene", default=None, help="Chunk scene manifest (chunk-local cameras).")
@click.option("--anchor-map", default=None,
              help="JSON file: list of [local_index, global_frame] anchor pairs.")
@click.option("--threshold", type=float, default=0.05, help="Misregistration threshold.")
@click.option("--dry-run", is_flag=True)
@_wrap
def memory_cmd(state_dir, init_scene, chunk_scene, anchor_map, threshold, dry_run):
    """Initialize the long-video memory state or register a new chunk into it."""
    state_dir = Path(state_dir)
    if init_scene:
        recon = sceneio.load_scene(init_scene)
        cloud = build_persistent(recon.lift_all())
        state = mem.GlobalState(cloud=cloud, cams=recon.cams)
        if dry_run:
            _progress("dry run: state valid, not writing")
            return
        mem.save_state(state, state_dir)
        _progress(f"initialized state with {state.frame_count} frames at {state_dir}")
        return
    if not (chunk_scene and anchor_map):
        raise ValidationError("provide --init-scene, or --chunk-scene with --anchor-map")
    state = mem.load_state(state_dir)
    recon = sceneio.load_scene(chunk_scene)
    pairs = json.loads(Path(anchor_map).read_text())
    chunk = mem.ChunkReconstruction(
        frames=recon.frames, depths=recon.depths, local_cams=recon.cams,
        static_masks=recon.static_masks,
        anchor_map=tuple((int(a), int(b)) for a, b in pairs))
    new_state = mem.register_chunk(state, chunk, misregistration_threshold=threshold)
    rec = new_state.log[-1]
    _progress(f"registered chunk: residual {rec.mean_anchor_residual:.4g}, "
              f"{rec.new_frames} new frames")
    if dry_run:
        _progress("dry run: not writing")
        return
    mem.save_state(new_state, state_dir)
    _emit_json(rec.to_dict(), None)


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@_wrap
def serve(port, host):
    """Run the interactive camera-design server."""
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
