import { describe, expect, it } from "vitest";
import { SceneMirror } from "../src/mirror.js";
import type { SceneSnapshot } from "../src/protocol.js";

function snapshot(revision: number): SceneSnapshot {
  return {
    schema_version: 1,
    revision,
    images: [],
    buildings: [],
    terrain: null,
    projectors: [],
    mask_table: { bitsets: {}, pool: {} },
    placements: [],
    trajectories: [],
  };
}

describe("SceneMirror", () => {
  it("starts empty and needs a refresh", () => {
    const m = new SceneMirror();
    expect(m.status).toBe("empty");
    expect(m.revision).toBe(-1);
  });

  it("is fresh after applying a snapshot", () => {
    const m = new SceneMirror();
    expect(m.applySnapshot(snapshot(5))).toBe(true);
    expect(m.status).toBe("fresh");
    expect(m.revision).toBe(5);
  });

  it("an event ahead of the mirror marks it stale", () => {
    const m = new SceneMirror();
    m.applySnapshot(snapshot(5));
    expect(m.observeRevision(7)).toBe(true);
    expect(m.status).toBe("stale");
    m.applySnapshot(snapshot(7));
    expect(m.status).toBe("fresh");
  });

  it("stale or replayed events are ignored", () => {
    const m = new SceneMirror();
    m.applySnapshot(snapshot(5));
    expect(m.observeRevision(4)).toBe(false);
    expect(m.observeRevision(5)).toBe(false);
    expect(m.status).toBe("fresh");
  });

  it("out-of-order snapshots never move the mirror backwards", () => {
    const m = new SceneMirror();
    m.applySnapshot(snapshot(9));
    expect(m.applySnapshot(snapshot(6))).toBe(false);
    expect(m.revision).toBe(9);
    // mirror revision never exceeds the highest known server revision
    expect(m.revision).toBeLessThanOrEqual(m.knownRevision);
  });

  it("gap in events still ends fresh after one full refresh", () => {
    const m = new SceneMirror();
    m.applySnapshot(snapshot(3));
    m.observeRevision(8); // revisions 4..7 were never seen
    expect(m.status).toBe("stale");
    m.applySnapshot(snapshot(8));
    expect(m.status).toBe("fresh");
  });
});
