// Revision-keyed local copy of the server's scene.
//
// SCENE_EVENT broadcasts carry only a mutation summary, so the mirror
// treats any event ahead of its revision as an invalidation and pulls a
// full snapshot; the invariant is that the mirror's revision never runs
// ahead of the server and stale data is always flagged before use.

import type { SceneSnapshot } from "./protocol.js";

export type MirrorStatus = "empty" | "fresh" | "stale";

export class SceneMirror {
  scene: SceneSnapshot | null = null;
  /** highest server revision we have heard of (events included) */
  knownRevision = -1;

  get revision(): number {
    return this.scene ? this.scene.revision : -1;
  }

  get status(): MirrorStatus {
    if (this.scene === null) return "empty";
    return this.scene.revision >= this.knownRevision ? "fresh" : "stale";
  }

  /** Returns true when the snapshot advanced the mirror. */
  applySnapshot(scene: SceneSnapshot): boolean {
    if (this.scene !== null && scene.revision < this.scene.revision) {
      return false; // out-of-order snapshot; keep the newer state
    }
    this.scene = scene;
    if (scene.revision > this.knownRevision) {
      this.knownRevision = scene.revision;
    }
    return true;
  }

  /** Feed a SCENE_EVENT (or ACK) revision; true when a refresh is needed. */
  observeRevision(revision: number): boolean {
    if (revision > this.knownRevision) {
      this.knownRevision = revision;
    }
    return this.status !== "fresh";
  }
}
