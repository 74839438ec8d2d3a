import struct

import numpy as np
import pytest

from conftest import random_pose
from reshoot.cloud import build_persistent, lift_frame
from reshoot.datagen import ReconInput
from reshoot.errors import IOFailure, PlyParseError
from reshoot.geometry import CameraIntrinsics, CameraPose
from reshoot.sceneio import (
    load_cameras,
    load_cloud,
    load_depth_bin,
    load_depth_png16,
    load_mask_png,
    load_png,
    load_scene,
    save_cameras,
    save_cloud,
    save_depth_bin,
    save_depth_png16,
    save_mask_png,
    save_png,
    save_render_depth,
    save_scene,
)
from reshoot.trajectory import CameraSequence

K = CameraIntrinsics(fx=20.0, fy=20.0, cx=8.0, cy=8.0, width=16, height=16)


def make_recon(rng, frames=2):
    h, w = K.height, K.width
    return ReconInput(
        frames=rng.integers(0, 256, (frames, h, w, 3)) / 255.0,
        depths=rng.uniform(1.0, 5.0, (frames, h, w)),
        cams=CameraSequence(poses=tuple(random_pose(rng) for _ in range(frames)),
                            intrinsics=tuple([K] * frames)),
        static_masks=rng.random((frames, h, w)) < 0.5)


class TestImages:
    def test_png_roundtrip_lossless_on_grid(self, rng, tmp_path):
        img = rng.integers(0, 256, (8, 10, 3)) / 255.0
        save_png(tmp_path / "a.png", img)
        assert np.array_equal(load_png(tmp_path / "a.png"), img)

    def test_png_quantizes_by_rounding(self, tmp_path):
        img = np.full((2, 2, 3), 100.4 / 255.0)
        save_png(tmp_path / "a.png", img)
        back = load_png(tmp_path / "a.png")
        assert np.array_equal(back * 255.0, np.full((2, 2, 3), 100.0))

    def test_mask_roundtrip(self, rng, tmp_path):
        mask = rng.random((12, 7)) < 0.4
        save_mask_png(tmp_path / "m.png", mask)
        assert np.array_equal(load_mask_png(tmp_path / "m.png"), mask)

    def test_missing_files(self, tmp_path):
        with pytest.raises(IOFailure):
            load_png(tmp_path / "nope.png")
        with pytest.raises(IOFailure):
            load_mask_png(tmp_path / "nope.png")


class TestDepth:
    def test_bin_roundtrip(self, rng, tmp_path):
        depth = rng.uniform(0.1, 50.0, (6, 9)).astype(np.float32).astype(np.float64)
        save_depth_bin(tmp_path / "d.bin", depth)
        assert np.array_equal(load_depth_bin(tmp_path / "d.bin"), depth)

    def test_bin_bad_magic(self, tmp_path):
        (tmp_path / "d.bin").write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(IOFailure):
            load_depth_bin(tmp_path / "d.bin")

    def test_bin_truncated(self, rng, tmp_path):
        save_depth_bin(tmp_path / "d.bin", rng.uniform(1, 2, (4, 4)))
        data = (tmp_path / "d.bin").read_bytes()
        (tmp_path / "d.bin").write_bytes(data[:-3])
        with pytest.raises(IOFailure):
            load_depth_bin(tmp_path / "d.bin")

    def test_render_depth_header(self, rng, tmp_path):
        depth = rng.uniform(1, 2, (3, 5))
        save_render_depth(tmp_path / "r.bin", depth, frame_index=7)
        data = (tmp_path / "r.bin").read_bytes()
        assert data[:4] == b"RRD1"
        w, h, frame = struct.unpack_from("<III", data, 4)
        assert (w, h, frame) == (5, 3, 7)
        back = np.frombuffer(data, dtype="<f4", offset=16).reshape(3, 5)
        assert np.array_equal(back, depth.astype(np.float32))

    def test_png16_scale(self, tmp_path):
        depth = np.array([[0.0, 0.001], [1.5, 65.535]])
        save_depth_png16(tmp_path / "d.png", depth, scale=0.001)
        back = load_depth_png16(tmp_path / "d.png", scale=0.001)
        assert np.abs(back - depth).max() < 0.0005 + 1e-12

    def test_png16_quantization_bound(self, rng, tmp_path):
        depth = rng.uniform(0, 60, (10, 10))
        scale = 0.001
        save_depth_png16(tmp_path / "d.png", depth, scale)
        back = load_depth_png16(tmp_path / "d.png", scale)
        assert np.abs(back - depth).max() <= scale / 2 + 1e-12


class TestCloudPly:
    def _cloud(self, rng, frames=3):
        h, w = K.height, K.width
        parts = []
        for i in range(frames):
            img = rng.integers(0, 256, (h, w, 3)) / 255.0
            depth = rng.uniform(1, 5, (h, w))
            mask = rng.random((h, w)) < 0.5
            parts.append(lift_frame(img, depth, mask, K, random_pose(rng),
                                    frame_index=i))
        return build_persistent(parts)

    def test_roundtrip(self, rng, tmp_path):
        pc = self._cloud(rng)
        save_cloud(pc, tmp_path / "c.ply")
        back = load_cloud(tmp_path / "c.ply")
        assert back.frame_count == pc.frame_count
        assert len(back.static_points) == len(pc.static_points)
        # positions survive at float32 precision, everything else exactly
        assert np.abs(back.static_points.positions -
                      pc.static_points.positions).max() < 1e-5
        assert np.array_equal(back.static_points.colors, pc.static_points.colors)
        for i in range(pc.frame_count):
            a, b = back.dynamic_by_frame[i], pc.dynamic_by_frame[i]
            assert np.array_equal(a.frame_index, b.frame_index)
            assert np.array_equal(a.u, b.u)
            assert np.array_equal(a.v, b.v)
            assert np.array_equal(a.source, b.source)

    def test_empty_cloud_roundtrip(self, rng, tmp_path):
        h, w = K.height, K.width
        empty = lift_frame(np.zeros((h, w, 3)), np.full((h, w), np.nan),
                           np.zeros((h, w), bool), K, CameraPose.identity())
        pc = build_persistent([empty])
        save_cloud(pc, tmp_path / "e.ply")
        back = load_cloud(tmp_path / "e.ply")
        assert back.total_points() == 0
        assert back.frame_count == 1

    def test_third_party_ply_falls_back(self, tmp_path):
        header = "\n".join([
            "ply", "format binary_little_endian 1.0", "element vertex 2",
            "property float x", "property float y", "property float z",
            "end_header", ""]).encode()
        body = np.array([(0, 0, 1), (1, 2, 3)], dtype="3<f4").tobytes()
        (tmp_path / "ext.ply").write_bytes(header + body)
        with pytest.warns(UserWarning):
            pc = load_cloud(tmp_path / "ext.ply")
        assert pc.frame_count == 1
        assert pc.static_points.is_static.all()
        assert len(pc.static_points) == 2
        assert np.allclose(pc.static_points.positions[1], [1, 2, 3])

    def test_not_a_ply(self, tmp_path):
        (tmp_path / "x.ply").write_bytes(b"garbage")
        with pytest.raises(PlyParseError):
            load_cloud(tmp_path / "x.ply")

    def test_truncated_body_reports_offset(self, rng, tmp_path):
        pc = self._cloud(rng, frames=1)
        save_cloud(pc, tmp_path / "c.ply")
        data = (tmp_path / "c.ply").read_bytes()
        (tmp_path / "c.ply").write_bytes(data[: len(data) // 2])
        with pytest.raises(PlyParseError) as e:
            load_cloud(tmp_path / "c.ply")
        assert "truncated" in str(e.value)

    def test_ascii_ply_rejected(self, tmp_path):
        (tmp_path / "a.ply").write_bytes(
            b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n")
        with pytest.raises(PlyParseError):
            load_cloud(tmp_path / "a.ply")

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOFailure):
            load_cloud(tmp_path / "nope.ply")


class TestCameras:
    def test_roundtrip(self, rng, tmp_path):
        cams = CameraSequence(poses=tuple(random_pose(rng) for _ in range(4)),
                              intrinsics=tuple([K] * 4))
        save_cameras(cams, tmp_path / "cams.json")
        back = load_cameras(tmp_path / "cams.json")
        assert len(back) == 4
        for a, b in zip(back.poses, cams.poses):
            assert a.allclose(b, atol=0)
        assert back.intrinsics == cams.intrinsics


class TestScene:
    def test_roundtrip_rfd(self, rng, tmp_path):
        rec = make_recon(rng)
        manifest = save_scene(rec, tmp_path)
        back = load_scene(manifest)
        assert np.array_equal(back.frames, rec.frames)
        assert np.abs(back.depths - rec.depths).max() < 1e-6
        assert np.array_equal(back.static_masks, rec.static_masks)
        assert len(back.cams) == len(rec.cams)

    def test_roundtrip_png16(self, rng, tmp_path):
        rec = make_recon(rng)
        manifest = save_scene(rec, tmp_path, depth_format="png16",
                              depth_scale=0.001)
        back = load_scene(manifest)
        assert np.abs(back.depths - rec.depths).max() <= 0.0005 + 1e-12

    def test_missing_frame_names_first_gap(self, rng, tmp_path):
        rec = make_recon(rng, frames=3)
        manifest = save_scene(rec, tmp_path)
        (tmp_path / "rgb" / "00001.png").unlink()
        with pytest.raises(IOFailure) as e:
            load_scene(manifest)
        assert "00001" in str(e.value)

    def test_camera_count_mismatch(self, rng, tmp_path):
        rec = make_recon(rng, frames=3)
        manifest = save_scene(rec, tmp_path)
        short = CameraSequence(poses=rec.cams.poses[:2],
                               intrinsics=rec.cams.intrinsics[:2])
        save_cameras(short, tmp_path / "cameras.json")
        with pytest.raises(IOFailure):
            load_scene(manifest)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(IOFailure):
            load_scene(tmp_path / "scene.json")
