/**
 * Client-side point-cloud viewport: pinhole projection for the scatter view,
 * frustum gizmos for keyframes, and the interpolated-path polyline.
 *
 * Camera convention matches the server: +z forward, +x right, +y down, pose
 * stored camera-to-world. This math is viewport navigation only; interpolated
 * cameras always come from the server.
 */

import type { CameraRecord, CloudPoints } from "./api";
import type { ViewportCamera } from "./state";
import type { Mat3, Vec3 } from "./track";

export interface ProjectedPoints {
  /** Interleaved screen x, y per visible point. */
  xy: Float32Array;
  /** Camera-space depth per visible point (for paint ordering). */
  depth: Float32Array;
  /** Index into the source cloud per visible point. */
  index: Uint32Array;
  count: number;
}

function focalFromFov(fovVDeg: number, height: number): number {
  return height / (2 * Math.tan((fovVDeg * Math.PI) / 360));
}

export function worldToCam(p: Vec3, camera: ViewportCamera): Vec3 {
  const r = camera.rotation;
  const dx = p[0] - camera.center[0];
  const dy = p[1] - camera.center[1];
  const dz = p[2] - camera.center[2];
  // columns of R are the camera axes in world space
  return [
    dx * r[0] + dy * r[3] + dz * r[6],
    dx * r[1] + dy * r[4] + dz * r[7],
    dx * r[2] + dy * r[5] + dz * r[8],
  ];
}

export function projectPoints(
  cloud: CloudPoints,
  camera: ViewportCamera,
  width: number,
  height: number,
): ProjectedPoints {
  const f = focalFromFov(camera.fovV, height);
  const cx = width / 2;
  const cy = height / 2;
  const xy = new Float32Array(cloud.count * 2);
  const depth = new Float32Array(cloud.count);
  const index = new Uint32Array(cloud.count);
  let n = 0;
  for (let i = 0; i < cloud.count; i++) {
    const p: Vec3 = [
      cloud.positions[i * 3]!,
      cloud.positions[i * 3 + 1]!,
      cloud.positions[i * 3 + 2]!,
    ];
    const [x, y, z] = worldToCam(p, camera);
    if (z <= 0) continue;
    const u = (f * x) / z + cx;
    const v = (f * y) / z + cy;
    if (u < 0 || u >= width || v < 0 || v >= height) continue;
    xy[n * 2] = u;
    xy[n * 2 + 1] = v;
    depth[n] = z;
    index[n] = i;
    n++;
  }
  return { xy: xy.subarray(0, n * 2), depth: depth.subarray(0, n), index: index.subarray(0, n), count: n };
}

export interface Segment {
  a: Vec3;
  b: Vec3;
}

/** Wireframe frustum gizmo for one keyframe camera: apex to the four corners
 * of a near plane at `size`, plus the near-plane rectangle. */
export function frustumLines(
  rotation: Mat3,
  center: Vec3,
  fovVDeg: number,
  aspect: number,
  size = 0.5,
): Segment[] {
  const halfV = Math.tan((fovVDeg * Math.PI) / 360) * size;
  const halfH = halfV * aspect;
  const toWorld = (c: Vec3): Vec3 => [
    rotation[0] * c[0] + rotation[1] * c[1] + rotation[2] * c[2] + center[0],
    rotation[3] * c[0] + rotation[4] * c[1] + rotation[5] * c[2] + center[1],
    rotation[6] * c[0] + rotation[7] * c[1] + rotation[8] * c[2] + center[2],
  ];
  const corners: Vec3[] = [
    toWorld([-halfH, -halfV, size]),
    toWorld([halfH, -halfV, size]),
    toWorld([halfH, halfV, size]),
    toWorld([-halfH, halfV, size]),
  ];
  const segments: Segment[] = corners.map((c) => ({ a: center, b: c }));
  for (let i = 0; i < 4; i++) {
    segments.push({ a: corners[i]!, b: corners[(i + 1) % 4]! });
  }
  return segments;
}

/** Polyline through the server-interpolated camera centers. */
export function pathPolyline(cameras: CameraRecord[]): Vec3[] {
  return cameras.map((c) => [c.center[0]!, c.center[1]!, c.center[2]!]);
}
