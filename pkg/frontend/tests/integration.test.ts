/**
 * End-to-end tests against a real preview server and the rendering CLI.
 * Requires python3 with the reshoot package installed (pip install -e ..).
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { WebSocket } from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReshootClient, type PreviewFrame } from "../src/api";
import {
  initialState,
  setKeyframeAtPlayhead,
  setPlayhead,
  toTrack,
  updateKeyframe,
  type UISessionState,
} from "../src/state";
import { PreviewStream, type StreamSocket } from "../src/stream";
import { serializeTrack, IDENTITY_ROTATION } from "../src/track";

const FIXTURES = join(__dirname, "fixtures");

let workDir: string;
let cloudPly: string;
let server: ChildProcess;
let baseUrl: string;
let client: ReshootClient;

function sha256(data: Uint8Array): string {
  return createHash("sha256").update(data).digest("hex");
}

function runCli(args: string[]): ReturnType<typeof spawnSync> {
  return spawnSync("python3", ["-m", "reshoot.cli", ...args], { encoding: "utf8" });
}

async function waitForServer(url: string): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${url}/openapi.json`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`server at ${url} never became ready`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "reshoot-ui-"));

  const fixture = spawnSync("python3", [join(FIXTURES, "make_fixture.py"), workDir], {
    encoding: "utf8",
  });
  expect(fixture.status, fixture.stderr).toBe(0);
  const manifest = fixture.stdout.trim();

  const lifted = join(workDir, "lifted.ply");
  cloudPly = join(workDir, "cloud.ply");
  const lift = runCli(["lift", "--scene", manifest, "--out", lifted]);
  expect(lift.status, String(lift.stderr)).toBe(0);
  const persist = runCli(["persist", "--cloud", lifted, "--out", cloudPly]);
  expect(persist.status, String(persist.stderr)).toBe(0);

  server = spawn("python3", [join(FIXTURES, "serve.py")], { stdio: ["ignore", "pipe", "pipe"] });
  const port = await new Promise<number>((resolve, reject) => {
    server.stdout!.once("data", (chunk: Buffer) => resolve(Number(String(chunk).trim())));
    server.once("exit", (code) => reject(new Error(`server exited early with ${code}`)));
  });
  baseUrl = `http://127.0.0.1:${port}`;
  await waitForServer(baseUrl);
  client = new ReshootClient(baseUrl);
});

afterAll(() => {
  server?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

/** Build a 3-keyframe track through the editing reducers, as the UI would. */
function designTrack(sessionId: string, totalFrames: number): UISessionState {
  let s = initialState(sessionId, totalFrames);
  s = setKeyframeAtPlayhead(s, { rotation: IDENTITY_ROTATION, center: [0, 0, -4], fovV: 50 });
  s = setPlayhead(s, 1);
  s = setKeyframeAtPlayhead(s, { rotation: IDENTITY_ROTATION, center: [0.3, 0, -4], fovV: 55 });
  s = setPlayhead(s, totalFrames - 1);
  s = setKeyframeAtPlayhead(s, {
    rotation: IDENTITY_ROTATION,
    center: [0.6, 0.2, -3.8],
    fovV: 60,
  });
  return s;
}

const wsFactory = (url: string): StreamSocket => {
  const socket = new WebSocket(url);
  socket.binaryType = "arraybuffer";
  return socket as unknown as StreamSocket;
};

describe("designer against a live server", () => {
  it("downloads the session cloud", async () => {
    const info = await client.createSession(cloudPly);
    try {
      expect(info.frames).toBe(3);
      // the cloud endpoint serves one frame's visible set, not all frames
      const cloud = await client.getCloud(info.session_id);
      expect(cloud.count).toBeGreaterThan(0);
      expect(cloud.count).toBeLessThanOrEqual(info.point_count);
      expect(cloud.positions.length).toBe(cloud.count * 3);
      // the fixture has both static and dynamic points
      const staticCount = cloud.isStatic.reduce((a, b) => a + b, 0);
      expect(staticCount).toBeGreaterThan(0);
      expect(staticCount).toBeLessThan(cloud.count);
    } finally {
      await client.deleteSession(info.session_id);
    }
  });

  it("exported track renders identically through the CLI", async () => {
    const info = await client.createSession(cloudPly);
    try {
      const state = designTrack(info.session_id, info.frames);
      const track = toTrack(state);
      const response = await client.putTrack(info.session_id, track);
      expect(response.cameras).toHaveLength(info.frames);

      const trackPath = join(workDir, "exported.json");
      writeFileSync(trackPath, serializeTrack(track));
      // the server's own frame-0 camera doubles as the CLI base intrinsics
      const basePath = join(workDir, "base.json");
      writeFileSync(basePath, JSON.stringify([response.cameras[0]]));

      const outDir = join(workDir, "renders");
      const render = runCli([
        "render",
        "--cloud", cloudPly,
        "--track", trackPath,
        "--base-camera", basePath,
        "--out", outDir,
      ]);
      expect(render.status, String(render.stderr)).toBe(0);

      for (let f = 0; f < info.frames; f++) {
        const preview = await client.fetchPreview(info.session_id, f);
        const cliPng = readFileSync(join(outDir, `render_${String(f).padStart(5, "0")}.png`));
        expect(sha256(preview), `frame ${f}`).toBe(sha256(cliPng));
      }
    } finally {
      await client.deleteSession(info.session_id);
    }
  });

  it("streams the preview for the playhead frame", async () => {
    const info = await client.createSession(cloudPly);
    const frames: PreviewFrame[] = [];
    const stream = new PreviewStream(client.streamUrl(info.session_id), {
      socketFactory: wsFactory,
      onPreview: (f) => frames.push(f),
    });
    try {
      stream.connect();
      await new Promise((r) => setTimeout(r, 200));
      await client.putTrack(info.session_id, toTrack(designTrack(info.session_id, info.frames)));
      stream.setPlayhead(2);
      for (let i = 0; i < 100 && !frames.some((f) => f.frame === 2); i++) {
        await new Promise((r) => setTimeout(r, 100));
      }
      const last = frames.filter((f) => f.frame === 2).at(-1);
      expect(last).toBeDefined();
      const direct = await client.fetchPreview(info.session_id, 2);
      expect(sha256(last!.png)).toBe(sha256(direct));
    } finally {
      stream.close();
      await client.deleteSession(info.session_id);
    }
  });

  it("converges on the newest track under rapid edits", async () => {
    const info = await client.createSession(cloudPly);
    const stream = new PreviewStream(client.streamUrl(info.session_id), {
      socketFactory: wsFactory,
      onPreview: () => {},
    });
    try {
      stream.connect();
      await new Promise((r) => setTimeout(r, 200));
      const base = designTrack(info.session_id, info.frames);
      // a burst of fov edits without waiting, as a slider drag would produce
      const puts = [];
      for (let i = 0; i < 10; i++) {
        const edited = updateKeyframe(base, 0, { fov_v: 40 + 2 * i });
        puts.push(client.putTrack(info.session_id, toTrack(edited)));
      }
      const responses = await Promise.all(puts);
      const finalVersion = Math.max(...responses.map((r) => r.version));
      for (let i = 0; i < 100; i++) {
        if ((stream.latest?.version ?? 0) >= finalVersion) break;
        await new Promise((r) => setTimeout(r, 100));
      }
      expect(stream.latest!.version).toBeGreaterThanOrEqual(finalVersion);
      // the last streamed image must match a fresh render of the final track
      await new Promise((r) => setTimeout(r, 300));
      const settled = await client.fetchPreview(info.session_id, stream.latest!.frame);
      expect(sha256(stream.latest!.png)).toBe(sha256(settled));
    } finally {
      stream.close();
      await client.deleteSession(info.session_id);
    }
  });
});
