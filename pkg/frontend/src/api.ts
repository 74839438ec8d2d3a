/**
 * HTTP client for the reshoot server plus parsers for its binary payloads.
 *
 * Cloud download:   "RPC1" | u32 count | count * { 3*f32 xyz, 3*u8 rgb, u8 static }
 * Preview message:  "RPV1" | u32 version | u32 frame | PNG bytes
 */

import type { Track } from "./track";
import { serializeTrack } from "./track";

export interface SessionInfo {
  session_id: string;
  frames: number;
  width: number;
  height: number;
  point_count: number;
  preview_scale: number;
}

export interface CameraRecord {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  rotation: number[];
  center: number[];
}

export interface TrackResponse {
  version: number;
  cameras: CameraRecord[];
}

export interface CloudPoints {
  count: number;
  positions: Float32Array; // xyz interleaved
  colors: Uint8Array; // rgb interleaved
  isStatic: Uint8Array;
}

export interface PreviewFrame {
  version: number;
  frame: number;
  png: Uint8Array;
}

const CLOUD_MAGIC = 0x31435052; // "RPC1" little-endian
const PREVIEW_MAGIC = 0x31565052; // "RPV1" little-endian
const POINT_STRIDE = 16;

export function parseCloudPayload(buf: ArrayBuffer): CloudPoints {
  const view = new DataView(buf);
  if (buf.byteLength < 8 || view.getUint32(0, true) !== CLOUD_MAGIC) {
    throw new Error("bad cloud payload magic");
  }
  const count = view.getUint32(4, true);
  if (buf.byteLength !== 8 + count * POINT_STRIDE) {
    throw new Error(`cloud payload length ${buf.byteLength} does not match count ${count}`);
  }
  const positions = new Float32Array(count * 3);
  const colors = new Uint8Array(count * 3);
  const isStatic = new Uint8Array(count);
  for (let i = 0; i < count; i++) {
    const off = 8 + i * POINT_STRIDE;
    positions[i * 3] = view.getFloat32(off, true);
    positions[i * 3 + 1] = view.getFloat32(off + 4, true);
    positions[i * 3 + 2] = view.getFloat32(off + 8, true);
    colors[i * 3] = view.getUint8(off + 12);
    colors[i * 3 + 1] = view.getUint8(off + 13);
    colors[i * 3 + 2] = view.getUint8(off + 14);
    isStatic[i] = view.getUint8(off + 15);
  }
  return { count, positions, colors, isStatic };
}

export function parsePreviewMessage(buf: ArrayBuffer): PreviewFrame {
  const view = new DataView(buf);
  if (buf.byteLength < 12 || view.getUint32(0, true) !== PREVIEW_MAGIC) {
    throw new Error("bad preview message magic");
  }
  return {
    version: view.getUint32(4, true),
    frame: view.getUint32(8, true),
    png: new Uint8Array(buf, 12),
  };
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(`server returned ${status}: ${detail}`);
  }
}

async function expectOk(res: Response): Promise<Response> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return res;
}

export class ReshootClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async createSession(
    scenePath: string,
    opts: { previewScale?: number; maxPreviewPoints?: number; pointRadius?: number } = {},
  ): Promise<SessionInfo> {
    const res = await this.fetchImpl(`${this.baseUrl}/session`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        scene_path: scenePath,
        preview_scale: opts.previewScale ?? 1.0,
        max_preview_points: opts.maxPreviewPoints ?? null,
        point_radius: opts.pointRadius ?? 0,
      }),
    });
    return (await expectOk(res)).json() as Promise<SessionInfo>;
  }

  async deleteSession(sessionId: string): Promise<void> {
    await expectOk(
      await this.fetchImpl(`${this.baseUrl}/session/${sessionId}`, { method: "DELETE" }),
    );
  }

  async getCloud(sessionId: string, maxPoints = 500_000, frame = 0): Promise<CloudPoints> {
    const res = await this.fetchImpl(
      `${this.baseUrl}/session/${sessionId}/cloud?max_points=${maxPoints}&frame=${frame}`,
    );
    return parseCloudPayload(await (await expectOk(res)).arrayBuffer());
  }

  async putTrack(sessionId: string, track: Track): Promise<TrackResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/session/${sessionId}/track`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: serializeTrack(track),
    });
    return (await expectOk(res)).json() as Promise<TrackResponse>;
  }

  async getTrack(sessionId: string): Promise<Track> {
    const res = await this.fetchImpl(`${this.baseUrl}/session/${sessionId}/track`);
    return (await expectOk(res)).json() as Promise<Track>;
  }

  async fetchPreview(sessionId: string, frame: number): Promise<Uint8Array> {
    const res = await this.fetchImpl(`${this.baseUrl}/session/${sessionId}/preview/${frame}`);
    return new Uint8Array(await (await expectOk(res)).arrayBuffer());
  }

  streamUrl(sessionId: string): string {
    return `${this.baseUrl.replace(/^http/, "ws")}/session/${sessionId}/stream`;
  }
}
