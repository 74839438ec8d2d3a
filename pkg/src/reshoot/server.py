"""Interactive camera-design service: scene sessions, keyframe track updates,
and live preview rendering over HTTP + WebSocket.

Track updates are serialized per session; the preview stream is latest-wins:
when a newer track arrives while a preview is being rendered, the stale result
is dropped and the newest track is rendered instead.
"""

from __future__ import annotations

import asyncio
import io
import itertools
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from PIL import Image
from pydantic import BaseModel, Field

from .cloud import PersistentCloud
from .errors import ReshootError, ValidationError
from .render import RenderOptions, render_frame
from .sceneio import load_cloud, load_scene
from .trajectory import CameraSequence, KeyframeTrack, interpolate_track

CLOUD_MAGIC = b"RPC1"
PREVIEW_MAGIC = b"RPV1"


class SessionCreate(BaseModel):
    scene_path: str
    preview_scale: float = Field(default=1.0, gt=0.0, le=1.0)
    max_preview_points: int | None = Field(default=None, ge=1)
    point_radius: int = Field(default=0, ge=0)


class SessionInfo(BaseModel):
    session_id: str
    frames: int
    width: int
    height: int
    point_count: int
    preview_scale: float


class KeyframeModel(BaseModel):
    frame: int = Field(ge=0)
    rotation: list[float] = Field(min_length=9, max_length=9)
    center: list[float] = Field(min_length=3, max_length=3)
    fov_v: float = Field(gt=0.0, lt=180.0)
    tension: float = Field(default=0.0, ge=-1.0, le=1.0)


class TrackModel(BaseModel):
    total_frames: int = Field(ge=1)
    keyframes: list[KeyframeModel] = Field(min_length=1)

    def to_track(self) -> KeyframeTrack:
        return KeyframeTrack.from_dict(self.model_dump(mode="python"))


class TrackResponse(BaseModel):
    version: int
    cameras: list[dict]


@dataclass
class Session:
    session_id: str
    cloud: PersistentCloud
    base_width: int
    base_height: int
    preview_scale: float
    max_preview_points: int | None
    point_radius: int
    track: KeyframeTrack | None = None
    sequence: CameraSequence | None = None
    version: int = 0
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    changed: asyncio.Condition = field(default_factory=asyncio.Condition)
    playhead: int = 0


def _subsample(n: int, max_points: int) -> np.ndarray:
    if max_points >= n:
        return np.arange(n)
    return (np.arange(max_points, dtype=np.int64) * n) // max_points


def _render_preview(session: Session, frame: int) -> bytes:
    if session.sequence is None:
        raise ValidationError("no track set for this session")
    if not 0 <= frame < len(session.sequence):
        raise ValidationError(f"frame {frame} out of range 0..{len(session.sequence) - 1}")
    cloud_frame = min(frame, session.cloud.frame_count - 1)
    vis = session.cloud.visible_set(cloud_frame)
    pos, col = vis.positions, vis.colors
    if session.max_preview_points is not None and len(vis) > session.max_preview_points:
        idx = _subsample(len(vis), session.max_preview_points)
        pos, col = pos[idx], col[idx]
    T, K = session.sequence[frame]
    out = render_frame(pos, col, K.scaled(session.preview_scale), T,
                       RenderOptions(point_radius=session.point_radius))
    arr = np.clip(np.floor(out.color * 255.0 + 0.5), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def create_app() -> FastAPI:
    app = FastAPI(title="reshoot camera designer")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"http://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return s

    @app.post("/session", response_model=SessionInfo)
    async def create_session(req: SessionCreate):
        path = Path(req.scene_path)
        try:
            if path.suffix == ".ply":
                cloud = await run_in_threadpool(load_cloud, path)
                dims = None
            else:
                recon = await run_in_threadpool(load_scene, path)
                from .cloud import build_persistent
                cloud = build_persistent(recon.lift_all())
                K = recon.cams.intrinsics[0]
                dims = (K.width, K.height)
        except ReshootError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        if dims is None:
            # plain cloud: no native image size, UI supplies it via the track FOV
            dims = (640, 480)
        session_id = f"s{next(counter)}"
        sessions[session_id] = Session(
            session_id=session_id, cloud=cloud,
            base_width=dims[0], base_height=dims[1],
            preview_scale=req.preview_scale,
            max_preview_points=req.max_preview_points,
            point_radius=req.point_radius,
        )
        return SessionInfo(session_id=session_id, frames=cloud.frame_count,
                           width=dims[0], height=dims[1],
                           point_count=cloud.total_points(),
                           preview_scale=req.preview_scale)

    @app.delete("/session/{session_id}")
    async def close_session(session_id: str):
        get_session(session_id)
        del sessions[session_id]
        return {"closed": session_id}

    @app.get("/session/{session_id}/cloud")
    async def download_cloud(session_id: str, max_points: int = 500_000, frame: int = 0):
        s = get_session(session_id)
        if not 0 <= frame < s.cloud.frame_count:
            raise HTTPException(status_code=422, detail=f"frame {frame} out of range")
        vis = s.cloud.visible_set(frame)
        idx = _subsample(len(vis), max_points)
        pos = vis.positions[idx].astype("<f4")
        col = np.clip(np.floor(vis.colors[idx] * 255.0 + 0.5), 0, 255).astype(np.uint8)
        static = vis.is_static[idx].astype(np.uint8)
        rec = np.empty(len(idx), dtype=[("p", "<f4", 3), ("c", "u1", 3), ("s", "u1")])
        rec["p"], rec["c"], rec["s"] = pos, col, static
        payload = CLOUD_MAGIC + struct.pack("<I", len(idx)) + rec.tobytes()
        return Response(content=payload, media_type="application/octet-stream")

    @app.put("/session/{session_id}/track", response_model=TrackResponse)
    async def put_track(session_id: str, track: TrackModel):
        s = get_session(session_id)
        try:
            kt = track.to_track()
            base = _base_intrinsics(s, kt)
            seq = await run_in_threadpool(interpolate_track, kt, base)
        except ReshootError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        async with s.lock:
            s.track = kt
            s.sequence = seq
            s.version += 1
            version = s.version
        async with s.changed:
            s.changed.notify_all()
        return TrackResponse(version=version, cameras=seq.to_list())

    @app.get("/session/{session_id}/track")
    async def get_track(session_id: str):
        s = get_session(session_id)
        if s.track is None:
            raise HTTPException(status_code=404, detail="no track set")
        return s.track.to_dict()

    @app.get("/session/{session_id}/preview/{frame}")
    async def preview(session_id: str, frame: int):
        s = get_session(session_id)
        try:
            png = await run_in_threadpool(_render_preview, s, frame)
        except ValidationError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        except ReshootError as e:
            raise HTTPException(status_code=500, detail=str(e)) from e
        return Response(content=png, media_type="image/png")

    @app.websocket("/session/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str):
        s = sessions.get(session_id)
        if s is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        closed = asyncio.Event()

        async def watch_playhead():
            # client messages move the playhead; any message re-triggers a push
            try:
                while True:
                    msg = await ws.receive_json()
                    if "frame" in msg:
                        s.playhead = int(msg["frame"])
                    async with s.changed:
                        s.version += 1
                        s.changed.notify_all()
            except Exception:
                pass
            finally:
                closed.set()
                async with s.changed:
                    s.changed.notify_all()

        reader = asyncio.create_task(watch_playhead())
        last_sent = 0
        try:
            while True:
                async with s.changed:
                    await s.changed.wait_for(
                        lambda: closed.is_set() or s.version > last_sent)
                if closed.is_set():
                    break
                # latest-wins: re-render until the version is stable
                while True:
                    version = s.version
                    frame = min(s.playhead, (len(s.sequence) - 1) if s.sequence else 0)
                    try:
                        png = await run_in_threadpool(_render_preview, s, frame)
                    except ReshootError:
                        last_sent = version
                        break
                    if s.version == version:
                        await ws.send_bytes(PREVIEW_MAGIC
                                            + struct.pack("<II", version, frame) + png)
                        last_sent = version
                        break
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader.cancel()

    return app


def _base_intrinsics(s: Session, kt: KeyframeTrack):
    from .geometry import CameraIntrinsics

    w, h = s.base_width, s.base_height
    fov = kt.keyframes[0].fov_v
    import math
    fy = h / (2.0 * math.tan(math.radians(fov) / 2.0))
    return CameraIntrinsics(fx=fy, fy=fy, cx=w / 2.0, cy=h / 2.0, width=w, height=h)
