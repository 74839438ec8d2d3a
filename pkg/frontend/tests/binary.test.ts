import { describe, expect, it } from "vitest";

import { parseCloudPayload, parsePreviewMessage } from "../src/api";

function cloudBuffer(points: Array<{ p: [number, number, number]; c: [number, number, number]; s: number }>): ArrayBuffer {
  const buf = new ArrayBuffer(8 + points.length * 16);
  const view = new DataView(buf);
  view.setUint32(0, 0x31435052, true); // "RPC1"
  view.setUint32(4, points.length, true);
  points.forEach((pt, i) => {
    const off = 8 + i * 16;
    view.setFloat32(off, pt.p[0], true);
    view.setFloat32(off + 4, pt.p[1], true);
    view.setFloat32(off + 8, pt.p[2], true);
    view.setUint8(off + 12, pt.c[0]);
    view.setUint8(off + 13, pt.c[1]);
    view.setUint8(off + 14, pt.c[2]);
    view.setUint8(off + 15, pt.s);
  });
  return buf;
}

describe("parseCloudPayload", () => {
  it("decodes positions, colors, and static flags", () => {
    const cloud = parseCloudPayload(
      cloudBuffer([
        { p: [1.5, -2, 0.25], c: [10, 20, 30], s: 1 },
        { p: [0, 4, 8], c: [255, 0, 128], s: 0 },
      ]),
    );
    expect(cloud.count).toBe(2);
    expect(Array.from(cloud.positions)).toEqual([1.5, -2, 0.25, 0, 4, 8]);
    expect(Array.from(cloud.colors)).toEqual([10, 20, 30, 255, 0, 128]);
    expect(Array.from(cloud.isStatic)).toEqual([1, 0]);
  });

  it("accepts an empty cloud", () => {
    expect(parseCloudPayload(cloudBuffer([])).count).toBe(0);
  });

  it("rejects a wrong magic", () => {
    const buf = cloudBuffer([]);
    new DataView(buf).setUint32(0, 0xdeadbeef, true);
    expect(() => parseCloudPayload(buf)).toThrow(/magic/);
  });

  it("rejects a truncated payload", () => {
    const buf = cloudBuffer([{ p: [0, 0, 1], c: [0, 0, 0], s: 0 }]);
    expect(() => parseCloudPayload(buf.slice(0, buf.byteLength - 4))).toThrow(/length/);
  });
});

describe("parsePreviewMessage", () => {
  function previewBuffer(version: number, frame: number, png: number[]): ArrayBuffer {
    const buf = new ArrayBuffer(12 + png.length);
    const view = new DataView(buf);
    view.setUint32(0, 0x31565052, true); // "RPV1"
    view.setUint32(4, version, true);
    view.setUint32(8, frame, true);
    new Uint8Array(buf, 12).set(png);
    return buf;
  }

  it("splits header from PNG bytes", () => {
    const msg = parsePreviewMessage(previewBuffer(7, 42, [0x89, 0x50, 0x4e, 0x47]));
    expect(msg.version).toBe(7);
    expect(msg.frame).toBe(42);
    expect(Array.from(msg.png)).toEqual([0x89, 0x50, 0x4e, 0x47]);
  });

  it("rejects short or mislabeled messages", () => {
    expect(() => parsePreviewMessage(new ArrayBuffer(4))).toThrow(/magic/);
    const buf = previewBuffer(1, 1, []);
    new DataView(buf).setUint32(0, 0, true);
    expect(() => parsePreviewMessage(buf)).toThrow(/magic/);
  });
});
