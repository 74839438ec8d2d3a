/**
 * Session state: the keyframe list, playhead, and the debounced track sync.
 *
 * All interpolation shown in the UI comes from the server's PUT /track
 * response; this module never computes spline math itself.
 */

import type { CameraRecord, TrackResponse } from "./api";
import { validateTrack, type Keyframe, type Mat3, type Track, type Vec3 } from "./track";

export type PreviewMode = "cloud" | "render";

export interface ViewportCamera {
  rotation: Mat3;
  center: Vec3;
  fovV: number;
}

export interface UISessionState {
  sessionId: string;
  totalFrames: number;
  playhead: number;
  keyframes: Keyframe[];
  previewMode: PreviewMode;
  connection: "connecting" | "open" | "closed" | "retrying";
  /** Dense per-frame cameras from the last accepted PUT, for the path polyline. */
  serverPath: CameraRecord[];
  trackVersion: number;
}

export function initialState(sessionId: string, totalFrames: number): UISessionState {
  return {
    sessionId,
    totalFrames,
    playhead: 0,
    keyframes: [],
    previewMode: "cloud",
    connection: "connecting",
    serverPath: [],
    trackVersion: 0,
  };
}

export function setPlayhead(state: UISessionState, frame: number): UISessionState {
  const clamped = Math.max(0, Math.min(state.totalFrames - 1, Math.round(frame)));
  return { ...state, playhead: clamped };
}

/** "Set keyframe here": capture the viewport camera at the playhead. */
export function setKeyframeAtPlayhead(
  state: UISessionState,
  camera: ViewportCamera,
  tension = 0,
): UISessionState {
  const kf: Keyframe = {
    frame: state.playhead,
    rotation: camera.rotation,
    center: camera.center,
    fov_v: camera.fovV,
    tension,
  };
  const keyframes = state.keyframes.filter((k) => k.frame !== state.playhead);
  keyframes.push(kf);
  keyframes.sort((a, b) => a.frame - b.frame);
  return { ...state, keyframes };
}

export function updateKeyframe(
  state: UISessionState,
  frame: number,
  patch: Partial<Pick<Keyframe, "fov_v" | "tension" | "rotation" | "center">>,
): UISessionState {
  return {
    ...state,
    keyframes: state.keyframes.map((k) => (k.frame === frame ? { ...k, ...patch } : k)),
  };
}

export function removeKeyframe(state: UISessionState, frame: number): UISessionState {
  return { ...state, keyframes: state.keyframes.filter((k) => k.frame !== frame) };
}

export function toTrack(state: UISessionState): Track {
  return { total_frames: state.totalFrames, keyframes: state.keyframes };
}

/** Export is enabled only once the track would pass server validation. */
export function canExport(state: UISessionState): boolean {
  return state.keyframes.length > 0 && validateTrack(toTrack(state)).length === 0;
}

export function applyTrackResponse(
  state: UISessionState,
  response: TrackResponse,
): UISessionState {
  return { ...state, serverPath: response.cameras, trackVersion: response.version };
}

/**
 * Debounce track edits before PUTting: rapid slider drags collapse into one
 * request carrying the newest track.
 */
export class TrackSync {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: Track | null = null;
  private inflight = false;

  constructor(
    private readonly put: (track: Track) => Promise<TrackResponse>,
    private readonly onResponse: (response: TrackResponse) => void,
    private readonly delayMs = 150,
  ) {}

  notify(track: Track): void {
    this.pending = track;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => void this.flush(), this.delayMs);
  }

  async flush(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.pending === null || this.inflight) return;
    const track = this.pending;
    this.pending = null;
    this.inflight = true;
    try {
      this.onResponse(await this.put(track));
    } finally {
      this.inflight = false;
    }
    // an edit may have arrived while the request was in flight
    if (this.pending !== null) await this.flush();
  }
}
