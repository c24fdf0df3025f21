import { describe, expect, it } from "vitest";
import { orderImages } from "../src/imagePanel.js";
import type { ImageRecordWire, ProjectorRecord } from "../src/protocol.js";

function img(id: string, timestamp: string | null): ImageRecordWire {
  return {
    image_id: id,
    source_path: `${id}.jpg`,
    width: 100,
    height: 100,
    heading: null,
    timestamp,
    focal35: null,
    orientation: 1,
  };
}

function proj(pid: number, imageId: string): ProjectorRecord {
  return {
    projector_id: pid,
    image_id: imageId,
    pose: { position: [0, 0, 0], yaw: 0, pitch: 0, roll: 0 },
    intrinsics: { hfov: 60, aspect: 1, near: 0.1, far: 500 },
    priority_timestamp: null,
  };
}

describe("orderImages", () => {
  it("lists images ascending by timestamp", () => {
    const images = [
      img("c", "2023-06-01T12:00:00Z"),
      img("a", "2023-06-01T10:00:00Z"),
      img("b", "2023-06-01T11:00:00Z"),
    ];
    const out = orderImages(images, []);
    expect(out.map((e) => e.imageId)).toEqual(["a", "b", "c"]);
  });

  it("flags undated images and lists them last", () => {
    const images = [img("undated", null), img("dated", "2023-06-01T10:00:00Z")];
    const out = orderImages(images, []);
    expect(out.map((e) => e.imageId)).toEqual(["dated", "undated"]);
    expect(out[1].undated).toBe(true);
    expect(out[0].undated).toBe(false);
  });

  it("links each image to its projector for jump-to", () => {
    const images = [img("a", "2023-06-01T10:00:00Z")];
    const out = orderImages(images, [proj(7, "a")]);
    expect(out[0].projectorId).toBe(7);
  });

  it("ties and missing projectors stay deterministic", () => {
    const images = [img("b", null), img("a", null)];
    const out = orderImages(images, []);
    expect(out.map((e) => e.imageId)).toEqual(["a", "b"]);
    expect(out[0].projectorId).toBeNull();
  });
});
