/**
 * Keyframe track model shared with the server.
 *
 * The exported JSON is exactly what the server's PUT /track endpoint and the
 * CLI `render --track` option consume; validation here mirrors the server's
 * rules so invalid edits are rejected before they leave the browser.
 */

import { z } from "zod";

export type Vec3 = [number, number, number];

/** Row-major 3x3 rotation, camera-to-world. */
export type Mat3 = [number, number, number, number, number, number, number, number, number];

export interface Keyframe {
  frame: number;
  rotation: Mat3;
  center: Vec3;
  fov_v: number;
  tension: number;
}

export interface Track {
  total_frames: number;
  keyframes: Keyframe[];
}

const ORTHO_TOL = 1e-9;

export function isOrthonormal(r: number[]): boolean {
  // check R^T R = I and det(R) = +1 within 1e-9, same as the server
  const dot = (a: number, b: number) =>
    r[a]! * r[b]! + r[a + 3]! * r[b + 3]! + r[a + 6]! * r[b + 6]!;
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      const want = i === j ? 1 : 0;
      if (Math.abs(dot(i, j) - want) > ORTHO_TOL) return false;
    }
  }
  const det =
    r[0]! * (r[4]! * r[8]! - r[5]! * r[7]!) -
    r[1]! * (r[3]! * r[8]! - r[5]! * r[6]!) +
    r[2]! * (r[3]! * r[7]! - r[4]! * r[6]!);
  return Math.abs(det - 1) <= ORTHO_TOL;
}

export const keyframeSchema = z.object({
  frame: z.number().int().min(0),
  rotation: z
    .array(z.number().finite())
    .length(9)
    .refine(isOrthonormal, { message: "rotation is not orthonormal" }),
  center: z.tuple([z.number().finite(), z.number().finite(), z.number().finite()]),
  fov_v: z.number().gt(0).lt(180),
  tension: z.number().min(-1).max(1),
});

export const trackSchema = z
  .object({
    total_frames: z.number().int().min(1),
    keyframes: z.array(keyframeSchema).min(1),
  })
  .superRefine((t, ctx) => {
    for (let i = 1; i < t.keyframes.length; i++) {
      if (t.keyframes[i]!.frame <= t.keyframes[i - 1]!.frame) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `keyframe indices must be strictly increasing at position ${i}`,
        });
      }
    }
    const last = t.keyframes[t.keyframes.length - 1];
    if (last && last.frame >= t.total_frames) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: `last keyframe ${last.frame} not below total_frames ${t.total_frames}`,
      });
    }
  });

export function validateTrack(track: Track): string[] {
  const res = trackSchema.safeParse(track);
  if (res.success) return [];
  return res.error.issues.map((i) => i.message);
}

/** Serialize for export / PUT; key order matches the server's own writer. */
export function serializeTrack(track: Track): string {
  const errors = validateTrack(track);
  if (errors.length > 0) {
    throw new Error(`invalid track: ${errors.join("; ")}`);
  }
  return JSON.stringify(
    {
      total_frames: track.total_frames,
      keyframes: track.keyframes.map((k) => ({
        frame: k.frame,
        rotation: k.rotation,
        center: k.center,
        fov_v: k.fov_v,
        tension: k.tension,
      })),
    },
    null,
    2,
  );
}

export function parseTrack(json: string): Track {
  return trackSchema.parse(JSON.parse(json)) as Track;
}

export const IDENTITY_ROTATION: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];
