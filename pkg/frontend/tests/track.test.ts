import { describe, expect, it } from "vitest";

import {
  IDENTITY_ROTATION,
  isOrthonormal,
  parseTrack,
  serializeTrack,
  validateTrack,
  type Track,
} from "../src/track";

const kf = (frame: number, extra: Partial<Track["keyframes"][number]> = {}) => ({
  frame,
  rotation: IDENTITY_ROTATION,
  center: [0, 0, 0] as [number, number, number],
  fov_v: 50,
  tension: 0,
  ...extra,
});

describe("track validation", () => {
  it("accepts a well-formed track", () => {
    expect(validateTrack({ total_frames: 10, keyframes: [kf(0), kf(5)] })).toEqual([]);
  });

  it("rejects an empty keyframe list", () => {
    expect(validateTrack({ total_frames: 10, keyframes: [] })).not.toEqual([]);
  });

  it("rejects non-increasing frames", () => {
    const errs = validateTrack({ total_frames: 10, keyframes: [kf(5), kf(5)] });
    expect(errs.join()).toMatch(/strictly increasing/);
  });

  it("rejects a keyframe at or past total_frames", () => {
    const errs = validateTrack({ total_frames: 10, keyframes: [kf(10)] });
    expect(errs.join()).toMatch(/total_frames/);
  });

  it("rejects out-of-range fov and tension", () => {
    expect(validateTrack({ total_frames: 5, keyframes: [kf(0, { fov_v: 0 })] })).not.toEqual([]);
    expect(validateTrack({ total_frames: 5, keyframes: [kf(0, { fov_v: 180 })] })).not.toEqual([]);
    expect(validateTrack({ total_frames: 5, keyframes: [kf(0, { tension: 1.5 })] })).not.toEqual([]);
  });

  it("rejects a non-orthonormal rotation", () => {
    const bad = [2, 0, 0, 0, 1, 0, 0, 0, 1] as typeof IDENTITY_ROTATION;
    expect(validateTrack({ total_frames: 5, keyframes: [kf(0, { rotation: bad })] })).not.toEqual([]);
  });
});

describe("isOrthonormal", () => {
  it("accepts rotations and rejects reflections", () => {
    expect(isOrthonormal([...IDENTITY_ROTATION])).toBe(true);
    // 90 degrees about z
    expect(isOrthonormal([0, -1, 0, 1, 0, 0, 0, 0, 1])).toBe(true);
    // reflection has det -1
    expect(isOrthonormal([1, 0, 0, 0, 1, 0, 0, 0, -1])).toBe(false);
  });
});

describe("serialization", () => {
  it("round trips", () => {
    const track: Track = { total_frames: 8, keyframes: [kf(0), kf(7, { tension: 0.5 })] };
    const back = parseTrack(serializeTrack(track));
    expect(back).toEqual(track);
  });

  it("refuses to serialize an invalid track", () => {
    expect(() => serializeTrack({ total_frames: 2, keyframes: [kf(5)] })).toThrow(/invalid track/);
  });

  it("writes the exact field names the server expects", () => {
    const parsed = JSON.parse(serializeTrack({ total_frames: 3, keyframes: [kf(1)] }));
    expect(Object.keys(parsed)).toEqual(["total_frames", "keyframes"]);
    expect(Object.keys(parsed.keyframes[0])).toEqual([
      "frame",
      "rotation",
      "center",
      "fov_v",
      "tension",
    ]);
  });
});
