"""On-disk artifacts: PNG sequences, float depth binaries, binary PLY clouds,
and the scene manifest.

Formats:
  - depth binary: magic "RFD1", u32 width, u32 height, row-major float32
  - render depth: magic "RRD1", u32 width, u32 height, u32 frame index, float32
  - PLY: binary little-endian with custom per-vertex properties frame_index
    (ushort), is_static (uchar), u/v (ushort), source (uchar)
  - scene.json: {version, frames, rgb, depth, masks, cameras, depth_format,
    depth_scale?, units?} with directories holding zero-padded 5-digit files
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .cloud import FramePointCloud, PersistentCloud
from .errors import IOFailure, PlyParseError, ShapeError
from .geometry import CameraIntrinsics, CameraPose
from .trajectory import CameraSequence

DEPTH_MAGIC = b"RFD1"
RENDER_DEPTH_MAGIC = b"RRD1"


# ---------------------------------------------------------------- images

def save_png(path: Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) float [0,1] image as 8-bit RGB PNG."""
    arr = np.clip(np.floor(np.asarray(image) * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def load_png(path: Path) -> np.ndarray:
    """Read an RGB PNG into (H, W, 3) float64 in [0, 1]."""
    if not Path(path).exists():
        raise IOFailure(f"missing image file {path}")
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_mask_png(path: Path, mask: np.ndarray) -> None:
    """Write an (H, W) boolean mask as 1-bit PNG."""
    Image.fromarray(np.asarray(mask, dtype=bool)).convert("1").save(path)


def load_mask_png(path: Path) -> np.ndarray:
    """Read a 1-bit or 8-bit mask PNG, thresholding grayscale at 128."""
    if not Path(path).exists():
        raise IOFailure(f"missing mask file {path}")
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


# ---------------------------------------------------------------- depth

def save_depth_bin(path: Path, depth: np.ndarray) -> None:
    depth = np.asarray(depth, dtype=np.float32)
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(DEPTH_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(np.ascontiguousarray(depth).tobytes())


def load_depth_bin(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"missing depth file {path}")
    data = path.read_bytes()
    if data[:4] != DEPTH_MAGIC:
        raise IOFailure(f"bad depth magic in {path}: {data[:4]!r}")
    w, h = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * w * h
    if len(data) != expected:
        raise IOFailure(f"depth file {path} has {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w).astype(np.float64)


def save_render_depth(path: Path, depth: np.ndarray, frame_index: int) -> None:
    depth = np.asarray(depth, dtype=np.float32)
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(RENDER_DEPTH_MAGIC)
        f.write(struct.pack("<III", w, h, frame_index))
        f.write(np.ascontiguousarray(depth).tobytes())


def load_depth_png16(path: Path, scale: float) -> np.ndarray:
    """Read a 16-bit depth PNG; depth = raw * scale."""
    if not Path(path).exists():
        raise IOFailure(f"missing depth file {path}")
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim != 2:
        raise IOFailure(f"depth PNG {path} is not single-channel")
    return arr * scale


def save_depth_png16(path: Path, depth: np.ndarray, scale: float) -> None:
    raw = np.asarray(depth, dtype=np.float64) / scale
    Image.fromarray(np.clip(np.floor(raw + 0.5), 0, 65535).astype(np.uint16)).save(path)


# ---------------------------------------------------------------- PLY

_PLY_PROPS = [
    ("x", "float", "<f4"), ("y", "float", "<f4"), ("z", "float", "<f4"),
    ("red", "uchar", "u1"), ("green", "uchar", "u1"), ("blue", "uchar", "u1"),
    ("frame_index", "ushort", "<u2"), ("is_static", "uchar", "u1"),
    ("u", "ushort", "<u2"), ("v", "ushort", "<u2"), ("source", "uchar", "u1"),
]

_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "short": "<i2", "ushort": "<u2",
    "int": "<i4", "uint": "<u4", "float": "<f4", "double": "<f8",
    "int8": "i1", "uint8": "u1", "int16": "<i2", "uint16": "<u2",
    "int32": "<i4", "uint32": "<u4", "float32": "<f4", "float64": "<f8",
}


def _cloud_to_records(c: FramePointCloud) -> np.ndarray:
    rec = np.empty(len(c), dtype=[(n, t) for n, _, t in _PLY_PROPS])
    pos = c.positions.astype(np.float32)
    rec["x"], rec["y"], rec["z"] = pos[:, 0], pos[:, 1], pos[:, 2]
    col = np.clip(np.floor(c.colors * 255.0 + 0.5), 0, 255).astype(np.uint8)
    rec["red"], rec["green"], rec["blue"] = col[:, 0], col[:, 1], col[:, 2]
    rec["frame_index"] = c.frame_index.astype(np.uint16)
    rec["is_static"] = c.is_static.astype(np.uint8)
    rec["u"] = c.u.astype(np.uint16)
    rec["v"] = c.v.astype(np.uint16)
    rec["source"] = c.source.astype(np.uint8)
    return rec


def _records_to_cloud(rec: np.ndarray) -> FramePointCloud:
    n = len(rec)

    def col(name, default, dtype):
        if name in rec.dtype.names:
            return rec[name].astype(dtype)
        return np.full(n, default, dtype=dtype)

    pos = np.stack([rec["x"], rec["y"], rec["z"]], axis=-1).astype(np.float64)
    missing = [p for p in ("red", "frame_index", "is_static", "u", "v") if p not in rec.dtype.names]
    if missing:
        warnings.warn(f"PLY lacks custom properties {missing}; using defaults "
                      "(static=true, frame=0)", stacklevel=3)
    colors = np.stack([col("red", 128, np.float64), col("green", 128, np.float64),
                       col("blue", 128, np.float64)], axis=-1) / 255.0
    return FramePointCloud(
        positions=pos, colors=colors,
        is_static=col("is_static", 1, np.uint8).astype(bool),
        frame_index=col("frame_index", 0, np.int64),
        u=col("u", 0, np.int64), v=col("v", 0, np.int64),
        source=col("source", 0, np.int64),
    )


def save_cloud(cloud: PersistentCloud, path: Path) -> None:
    """Write a persistent cloud as binary PLY: static pool first, then dynamic
    points frame by frame."""
    parts = [cloud.static_points, *cloud.dynamic_by_frame]
    rec = np.concatenate([_cloud_to_records(p) for p in parts])
    n = len(rec)
    header = ["ply", "format binary_little_endian 1.0",
              f"comment reshoot frame_count {cloud.frame_count}",
              f"comment reshoot static_count {len(cloud.static_points)}",
              f"element vertex {n}"]
    header += [f"property {t} {name}" for name, t, _ in _PLY_PROPS]
    header += ["end_header", ""]
    with open(path, "wb") as f:
        f.write("\n".join(header).encode("ascii"))
        if n:
            f.write(rec.tobytes())


def load_cloud(path: Path) -> PersistentCloud:
    """Read a PLY written by save_cloud, or a third-party vertex PLY (points
    default to static, frame 0)."""
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"missing cloud file {path}")
    data = path.read_bytes()
    if not data.startswith(b"ply"):
        raise PlyParseError("not a PLY file", offset=0)
    end = data.find(b"end_header\n")
    if end < 0:
        raise PlyParseError("missing end_header", offset=len(data))
    body_off = end + len(b"end_header\n")
    header = data[:end].decode("ascii", errors="replace").splitlines()

    fmt = next((l.split()[1] for l in header if l.startswith("format ")), None)
    if fmt != "binary_little_endian":
        raise PlyParseError(f"unsupported PLY format {fmt!r}", offset=0)
    n = None
    props: list[tuple[str, str]] = []
    frame_count = None
    static_count = None
    in_vertex = False
    for line in header:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise PlyParseError("list properties unsupported", offset=0)
            if tok[1] not in _PLY_TYPES:
                raise PlyParseError(f"unknown property type {tok[1]!r}", offset=0)
            props.append((tok[2], _PLY_TYPES[tok[1]]))
        elif tok[:2] == ["comment", "reshoot"] and len(tok) == 4:
            if tok[2] == "frame_count":
                frame_count = int(tok[3])
            elif tok[2] == "static_count":
                static_count = int(tok[3])
    if n is None:
        raise PlyParseError("no vertex element", offset=0)
    dtype = np.dtype([(name, t) for name, t in props])
    expected = body_off + n * dtype.itemsize
    if len(data) < expected:
        raise PlyParseError(f"truncated body: have {len(data)} bytes, need {expected}",
                            offset=len(data))
    rec = np.frombuffer(data, dtype=dtype, count=n, offset=body_off)
    flat = _records_to_cloud(rec)

    if static_count is None or frame_count is None:
        # third-party PLY: everything static, single frame
        return PersistentCloud(static_points=flat.subset(flat.is_static),
                               dynamic_by_frame=(flat.subset(~flat.is_static),))
    static = flat.subset(np.arange(len(flat)) < static_count)
    rest = flat.subset(np.arange(len(flat)) >= static_count)
    dynamic = tuple(rest.subset(rest.frame_index == i) for i in range(frame_count))
    return PersistentCloud(static_points=static, dynamic_by_frame=dynamic)


# ---------------------------------------------------------------- cameras

def save_cameras(cams: CameraSequence, path: Path) -> None:
    Path(path).write_text(cams.to_json())


def load_cameras(path: Path) -> CameraSequence:
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"missing camera file {path}")
    return CameraSequence.from_json(path.read_text())


# ---------------------------------------------------------------- scene

@dataclass(frozen=True)
class SceneManifest:
    version: int
    frames: int
    rgb_dir: str
    depth_dir: str
    mask_dir: str
    cameras: str
    depth_format: str = "rfd"      # "rfd" | "png16"
    depth_scale: float = 1.0
    units: str | None = None

    def to_dict(self) -> dict:
        d = {"version": self.version, "frames": self.frames, "rgb": self.rgb_dir,
             "depth": self.depth_dir, "masks": self.mask_dir, "cameras": self.cameras,
             "depth_format": self.depth_format, "depth_scale": self.depth_scale}
        if self.units:
            d["units"] = self.units
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneManifest":
        return cls(version=int(d.get("version", 1)), frames=int(d["frames"]),
                   rgb_dir=d["rgb"], depth_dir=d["depth"], mask_dir=d["masks"],
                   cameras=d["cameras"], depth_format=d.get("depth_format", "rfd"),
                   depth_scale=float(d.get("depth_scale", 1.0)), units=d.get("units"))


def _seq_paths(base: Path, subdir: str, count: int, ext: str, what: str) -> list[Path]:
    paths = [base / subdir / f"{i:05d}.{ext}" for i in range(count)]
    missing = [p for p in paths if not p.exists()]
    if missing:
        have = count - len(missing)
        raise IOFailure(f"{what} sequence in {base / subdir}: expected {count} files, "
                        f"found {have} (first missing: {missing[0].name})")
    return paths


def load_scene(manifest_path: Path):
    """Load a scene manifest into a datagen.ReconInput."""
    from .datagen import ReconInput  # local import: datagen depends on this module

    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise IOFailure(f"missing scene manifest {manifest_path}")
    m = SceneManifest.from_dict(json.loads(manifest_path.read_text()))
    base = manifest_path.parent
    cams = load_cameras(base / m.cameras)
    if len(cams) != m.frames:
        raise IOFailure(f"camera file {m.cameras} has {len(cams)} entries, "
                        f"manifest declares {m.frames} frames")
    ext = "bin" if m.depth_format == "rfd" else "png"
    rgb_paths = _seq_paths(base, m.rgb_dir, m.frames, "png", "rgb")
    depth_paths = _seq_paths(base, m.depth_dir, m.frames, ext, "depth")
    mask_paths = _seq_paths(base, m.mask_dir, m.frames, "png", "static-mask")

    K0 = cams.intrinsics[0]
    frames = np.empty((m.frames, K0.height, K0.width, 3))
    depths = np.empty((m.frames, K0.height, K0.width))
    masks = np.empty((m.frames, K0.height, K0.width), dtype=bool)
    for i in range(m.frames):
        img = load_png(rgb_paths[i])
        if m.depth_format == "rfd":
            dep = load_depth_bin(depth_paths[i])
        else:
            dep = load_depth_png16(depth_paths[i], m.depth_scale)
        msk = load_mask_png(mask_paths[i])
        for name, arr in (("rgb", img[..., 0]), ("depth", dep), ("mask", msk)):
            if arr.shape != (K0.height, K0.width):
                raise IOFailure(f"{name} frame {i} has shape {arr.shape}, "
                                f"expected {(K0.height, K0.width)}")
        frames[i], depths[i], masks[i] = img, dep, msk
    return ReconInput(frames=frames, depths=depths, cams=cams, static_masks=masks)


def save_scene(recon, out_dir: Path, depth_format: str = "rfd",
               depth_scale: float = 1.0, units: str | None = None) -> Path:
    """Write a ReconInput as a scene directory; returns the manifest path."""
    out_dir = Path(out_dir)
    for sub in ("rgb", "depth", "masks"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    n = len(recon.cams)
    for i in range(n):
        save_png(out_dir / "rgb" / f"{i:05d}.png", recon.frames[i])
        if depth_format == "rfd":
            save_depth_bin(out_dir / "depth" / f"{i:05d}.bin", recon.depths[i])
        else:
            save_depth_png16(out_dir / "depth" / f"{i:05d}.png", recon.depths[i], depth_scale)
        save_mask_png(out_dir / "masks" / f"{i:05d}.png", recon.static_masks[i])
    save_cameras(recon.cams, out_dir / "cameras.json")
    manifest = SceneManifest(version=1, frames=n, rgb_dir="rgb", depth_dir="depth",
                             mask_dir="masks", cameras="cameras.json",
                             depth_format=depth_format, depth_scale=depth_scale,
                             units=units)
    path = out_dir / "scene.json"
    path.write_text(json.dumps(manifest.to_dict(), indent=2))
    return path
