// Request/response plumbing over the engine's websocket bridge, plus the
// ViewerSession that keeps a SceneMirror in sync with server events.

import { SceneMirror } from "./mirror.js";
import {
  Envelope,
  MSG_ACK,
  MSG_ERR,
  MSG_GET_SCENE,
  MSG_HELLO,
  MSG_SCENE_EVENT,
  MSG_SCENE_SNAPSHOT,
  MSG_SET_POSE,
  Pose,
  SceneSnapshot,
  encodeEnvelope,
  parseEnvelope,
} from "./protocol.js";

/** Minimal websocket surface so tests can inject the `ws` package or a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "message", fn: (ev: { data: unknown }) => void): void;
}

export class ServerError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ServerError";
  }
}

interface PendingRequest {
  resolve: (env: Envelope) => void;
  reject: (err: Error) => void;
  timer: ReturnType<typeof setTimeout>;
}

export class ViewerConnection {
  private nextId = 1;
  private pending = new Map<number, PendingRequest>();
  onEvent: (body: Record<string, unknown>) => void = () => {};

  constructor(private socket: SocketLike, private timeoutMs = 8000) {
    socket.addEventListener("message", (ev) => {
      this.handleRaw(String(ev.data));
    });
  }

  handleRaw(raw: string): void {
    let env: Envelope;
    try {
      env = parseEnvelope(raw);
    } catch {
      return; // not ours; ignore
    }
    if (env.msg_type === MSG_SCENE_EVENT) {
      this.onEvent(env.body);
      return;
    }
    const ackFor = env.body["ack_for"];
    if (typeof ackFor === "number") {
      const pending = this.pending.get(ackFor);
      if (pending !== undefined) {
        this.pending.delete(ackFor);
        clearTimeout(pending.timer);
        pending.resolve(env);
      }
    }
  }

  request(msgType: number, body: unknown): Promise<Envelope> {
    const msgId = this.nextId++;
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(msgId);
        reject(new Error(`request ${msgId} timed out`));
      }, this.timeoutMs);
      this.pending.set(msgId, { resolve, reject, timer });
      this.socket.send(encodeEnvelope(msgId, msgType, body));
    });
  }

  close(): void {
    for (const pending of this.pending.values()) {
      clearTimeout(pending.timer);
      pending.reject(new Error("connection closed"));
    }
    this.pending.clear();
    this.socket.close();
  }
}

export class ViewerSession {
  mirror = new SceneMirror();
  selectedProjector: number | null = null;
  onSceneUpdated: (scene: SceneSnapshot) => void = () => {};
  private refreshing: Promise<void> | null = null;

  constructor(public connection: ViewerConnection) {
    connection.onEvent = (body) => {
      const revision = body["revision"];
      if (typeof revision === "number" && this.mirror.observeRevision(revision)) {
        void this.scheduleRefresh();
      }
    };
  }

  async connect(): Promise<number> {
    const env = await this.connection.request(MSG_HELLO, {});
    if (env.msg_type !== MSG_ACK) {
      throw new ServerError(String(env.body["error"] ?? "HELLO rejected"));
    }
    await this.refresh();
    return this.mirror.revision;
  }

  async refresh(): Promise<SceneSnapshot> {
    const env = await this.connection.request(MSG_GET_SCENE, {});
    if (env.msg_type !== MSG_SCENE_SNAPSHOT) {
      throw new ServerError(String(env.body["error"] ?? "GET_SCENE rejected"));
    }
    const scene = env.body["scene"] as SceneSnapshot;
    if (this.mirror.applySnapshot(scene)) {
      this.onSceneUpdated(scene);
    }
    return scene;
  }

  /** Coalesce refreshes triggered by event storms into one in-flight fetch
   *  (re-running until the mirror is fresh again). */
  scheduleRefresh(): Promise<void> {
    if (this.refreshing === null) {
      this.refreshing = (async () => {
        try {
          while (this.mirror.status !== "fresh") {
            await this.refresh();
          }
        } finally {
          this.refreshing = null;
        }
      })();
    }
    return this.refreshing;
  }

  /** Commit a pose; resolves with the new revision once the mirror caught up. */
  async setPose(projectorId: number, pose: Pose): Promise<number> {
    const env = await this.connection.request(MSG_SET_POSE, {
      projector_id: projectorId,
      pose,
    });
    if (env.msg_type === MSG_ERR) {
      throw new ServerError(String(env.body["error"] ?? "SET_POSE rejected"));
    }
    const revision = env.body["revision"] as number;
    this.mirror.observeRevision(revision);
    await this.scheduleRefresh();
    return revision;
  }
}
