/**
 * DOM wiring: canvas viewport, timeline scrubber, keyframe controls, export.
 * All logic lives in the other modules; this file only connects them.
 */

import { ReshootClient, type CloudPoints, type PreviewFrame } from "./api";
import {
  TrackSync,
  applyTrackResponse,
  canExport,
  initialState,
  setKeyframeAtPlayhead,
  setPlayhead,
  toTrack,
  updateKeyframe,
  type UISessionState,
  type ViewportCamera,
} from "./state";
import { PreviewStream, type ConnectionStatus } from "./stream";
import { serializeTrack, IDENTITY_ROTATION } from "./track";
import { frustumLines, pathPolyline, projectPoints } from "./viewport";

const SERVER = (window as { RESHOOT_SERVER?: string }).RESHOOT_SERVER ?? "http://127.0.0.1:8000";

interface App {
  state: UISessionState;
  cloud: CloudPoints | null;
  viewportCamera: ViewportCamera;
  lastPreview: PreviewFrame | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function drawViewport(app: App, canvas: HTMLCanvasElement): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (app.state.previewMode === "render" && app.lastPreview) {
    const blob = new Blob([app.lastPreview.png.slice()], { type: "image/png" });
    void createImageBitmap(blob).then((img) => {
      ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
    });
    return;
  }
  if (!app.cloud) return;
  const proj = projectPoints(app.cloud, app.viewportCamera, canvas.width, canvas.height);
  const image = ctx.getImageData(0, 0, canvas.width, canvas.height);
  for (let i = 0; i < proj.count; i++) {
    const x = Math.floor(proj.xy[i * 2]!);
    const y = Math.floor(proj.xy[i * 2 + 1]!);
    const src = proj.index[i]! * 3;
    const dst = (y * canvas.width + x) * 4;
    image.data[dst] = app.cloud.colors[src]!;
    image.data[dst + 1] = app.cloud.colors[src + 1]!;
    image.data[dst + 2] = app.cloud.colors[src + 2]!;
    image.data[dst + 3] = 255;
  }
  ctx.putImageData(image, 0, 0);
  drawOverlays(app, ctx, canvas);
}

function drawOverlays(app: App, ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement): void {
  const project = (p: [number, number, number]): [number, number] | null => {
    const cloud: CloudPoints = {
      count: 1,
      positions: new Float32Array(p),
      colors: new Uint8Array(3),
      isStatic: new Uint8Array(1),
    };
    const out = projectPoints(cloud, app.viewportCamera, canvas.width, canvas.height);
    return out.count ? [out.xy[0]!, out.xy[1]!] : null;
  };
  ctx.strokeStyle = "#4af";
  for (const kf of app.state.keyframes) {
    const segs = frustumLines(
      kf.rotation,
      kf.center,
      kf.fov_v,
      canvas.width / canvas.height,
    );
    for (const seg of segs) {
      const a = project(seg.a);
      const b = project(seg.b);
      if (!a || !b) continue;
      ctx.beginPath();
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
      ctx.stroke();
    }
  }
  ctx.strokeStyle = "#fa4";
  const path = pathPolyline(app.state.serverPath)
    .map(project)
    .filter((p): p is [number, number] => p !== null);
  if (path.length > 1) {
    ctx.beginPath();
    ctx.moveTo(path[0]![0], path[0]![1]);
    for (const p of path.slice(1)) ctx.lineTo(p[0], p[1]);
    ctx.stroke();
  }
}

async function boot(): Promise<void> {
  const client = new ReshootClient(SERVER);
  const scenePath = new URLSearchParams(location.search).get("scene");
  if (!scenePath) {
    el<HTMLDivElement>("banner").textContent = "add ?scene=/path/to/scene.json to the URL";
    return;
  }
  const info = await client.createSession(scenePath, { maxPreviewPoints: 500_000 });
  const app: App = {
    state: initialState(info.session_id, info.frames),
    cloud: await client.getCloud(info.session_id),
    viewportCamera: { rotation: IDENTITY_ROTATION, center: [0, 0, -4], fovV: 50 },
    lastPreview: null,
  };

  const canvas = el<HTMLCanvasElement>("viewport");
  const banner = el<HTMLDivElement>("banner");
  const scrubber = el<HTMLInputElement>("scrubber");
  const exportBtn = el<HTMLButtonElement>("export");
  const keyframeBtn = el<HTMLButtonElement>("set-keyframe");
  const tension = el<HTMLInputElement>("tension");
  const fov = el<HTMLInputElement>("fov");
  scrubber.max = String(info.frames - 1);

  const sync = new TrackSync(
    (track) => client.putTrack(app.state.sessionId, track),
    (response) => {
      app.state = applyTrackResponse(app.state, response);
      drawViewport(app, canvas);
    },
  );

  const stream = new PreviewStream(client.streamUrl(info.session_id), {
    socketFactory: (url) => new WebSocket(url) as unknown as never,
    onPreview: (frame) => {
      app.lastPreview = frame;
      if (app.state.previewMode === "render") drawViewport(app, canvas);
    },
    onStatus: (status: ConnectionStatus) => {
      app.state = { ...app.state, connection: status === "open" ? "open" : status };
      banner.textContent = status === "open" ? "" : `server ${status}`;
    },
  });
  stream.connect();

  const edited = (): void => {
    if (canExport(app.state)) sync.notify(toTrack(app.state));
    exportBtn.disabled = !canExport(app.state);
    drawViewport(app, canvas);
  };

  scrubber.addEventListener("input", () => {
    app.state = setPlayhead(app.state, Number(scrubber.value));
    stream.setPlayhead(app.state.playhead);
    drawViewport(app, canvas);
  });
  keyframeBtn.addEventListener("click", () => {
    app.state = setKeyframeAtPlayhead(app.state, app.viewportCamera, Number(tension.value));
    edited();
  });
  tension.addEventListener("input", () => {
    app.state = updateKeyframe(app.state, app.state.playhead, {
      tension: Number(tension.value),
    });
    edited();
  });
  fov.addEventListener("input", () => {
    app.state = updateKeyframe(app.state, app.state.playhead, { fov_v: Number(fov.value) });
    edited();
  });
  exportBtn.addEventListener("click", () => {
    const blob = new Blob([serializeTrack(toTrack(app.state))], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "track.json";
    a.click();
  });
  el<HTMLButtonElement>("mode").addEventListener("click", () => {
    app.state = {
      ...app.state,
      previewMode: app.state.previewMode === "cloud" ? "render" : "cloud",
    };
    drawViewport(app, canvas);
  });

  exportBtn.disabled = true;
  drawViewport(app, canvas);
}

if (typeof document !== "undefined") {
  void boot().catch((err: unknown) => {
    const banner = document.getElementById("banner");
    if (banner) banner.textContent = String(err);
  });
}
