import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { TrackResponse } from "../src/api";
import {
  TrackSync,
  applyTrackResponse,
  canExport,
  initialState,
  removeKeyframe,
  setKeyframeAtPlayhead,
  setPlayhead,
  toTrack,
  updateKeyframe,
  type ViewportCamera,
} from "../src/state";
import { IDENTITY_ROTATION, type Track } from "../src/track";

const camera: ViewportCamera = {
  rotation: IDENTITY_ROTATION,
  center: [1, 2, 3],
  fovV: 60,
};

describe("state reducers", () => {
  it("clamps and rounds the playhead", () => {
    const s = initialState("sid", 10);
    expect(setPlayhead(s, 4.6).playhead).toBe(5);
    expect(setPlayhead(s, -3).playhead).toBe(0);
    expect(setPlayhead(s, 99).playhead).toBe(9);
  });

  it("keeps keyframes sorted and replaces at the same frame", () => {
    let s = initialState("sid", 10);
    s = setKeyframeAtPlayhead(setPlayhead(s, 5), camera);
    s = setKeyframeAtPlayhead(setPlayhead(s, 2), camera);
    expect(s.keyframes.map((k) => k.frame)).toEqual([2, 5]);
    s = setKeyframeAtPlayhead(setPlayhead(s, 5), { ...camera, fovV: 90 });
    expect(s.keyframes.map((k) => k.frame)).toEqual([2, 5]);
    expect(s.keyframes[1]!.fov_v).toBe(90);
  });

  it("updates and removes a single keyframe", () => {
    let s = setKeyframeAtPlayhead(initialState("sid", 10), camera);
    s = updateKeyframe(s, 0, { tension: -0.5 });
    expect(s.keyframes[0]!.tension).toBe(-0.5);
    expect(removeKeyframe(s, 0).keyframes).toEqual([]);
  });

  it("only allows export once the track is valid", () => {
    let s = initialState("sid", 10);
    expect(canExport(s)).toBe(false);
    s = setKeyframeAtPlayhead(s, camera);
    expect(canExport(s)).toBe(true);
    expect(toTrack(s).total_frames).toBe(10);
  });

  it("applies a PUT response as the dense path", () => {
    const response: TrackResponse = {
      version: 3,
      cameras: [
        {
          fx: 1,
          fy: 1,
          cx: 0,
          cy: 0,
          width: 2,
          height: 2,
          rotation: [...IDENTITY_ROTATION],
          center: [0, 0, 0],
        },
      ],
    };
    const s = applyTrackResponse(initialState("sid", 10), response);
    expect(s.trackVersion).toBe(3);
    expect(s.serverPath).toHaveLength(1);
  });
});

describe("TrackSync", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  const track = (n: number): Track => ({
    total_frames: n,
    keyframes: [
      { frame: 0, rotation: IDENTITY_ROTATION, center: [0, 0, 0], fov_v: 50, tension: 0 },
    ],
  });
  const response: TrackResponse = { version: 1, cameras: [] };

  it("collapses rapid edits into one request with the newest track", async () => {
    const put = vi.fn().mockResolvedValue(response);
    const sync = new TrackSync(put, () => {}, 150);
    sync.notify(track(5));
    vi.advanceTimersByTime(100);
    sync.notify(track(6));
    vi.advanceTimersByTime(100);
    sync.notify(track(7));
    await vi.advanceTimersByTimeAsync(150);
    expect(put).toHaveBeenCalledTimes(1);
    expect(put.mock.calls[0]![0].total_frames).toBe(7);
  });

  it("re-sends when an edit arrives mid-request", async () => {
    let release: (r: TrackResponse) => void = () => {};
    const put = vi
      .fn()
      .mockImplementationOnce(() => new Promise<TrackResponse>((res) => (release = res)))
      .mockResolvedValue(response);
    const responses: number[] = [];
    const sync = new TrackSync(put, (r) => responses.push(r.version), 150);
    sync.notify(track(5));
    await vi.advanceTimersByTimeAsync(150);
    expect(put).toHaveBeenCalledTimes(1);
    sync.notify(track(9));
    await vi.advanceTimersByTimeAsync(150);
    // still blocked behind the first request
    expect(put).toHaveBeenCalledTimes(1);
    release({ version: 2, cameras: [] });
    await vi.runAllTimersAsync();
    expect(put).toHaveBeenCalledTimes(2);
    expect(put.mock.calls[1]![0].total_frames).toBe(9);
    expect(responses).toEqual([2, 1]);
  });

  it("flush sends a pending track immediately", async () => {
    const put = vi.fn().mockResolvedValue(response);
    const sync = new TrackSync(put, () => {}, 150);
    sync.notify(track(5));
    await sync.flush();
    expect(put).toHaveBeenCalledTimes(1);
    await vi.runAllTimersAsync();
    expect(put).toHaveBeenCalledTimes(1);
  });
});
