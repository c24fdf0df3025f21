import { describe, expect, it } from "vitest";
import { CalibrationControl } from "../src/calibrate.js";
import type { ViewerSession } from "../src/connection.js";
import type { Pose } from "../src/protocol.js";

const basePose: Pose = { position: [1, 2, 3], yaw: 10, pitch: 0, roll: 0 };

function fakeSession(behavior: "ack" | "err"): {
  session: ViewerSession;
  calls: Array<{ projectorId: number; pose: Pose }>;
} {
  const calls: Array<{ projectorId: number; pose: Pose }> = [];
  const session = {
    async setPose(projectorId: number, pose: Pose): Promise<number> {
      calls.push({ projectorId, pose });
      if (behavior === "err") throw new Error("pose rejected by server");
      return 42;
    },
  } as unknown as ViewerSession;
  return { session, calls };
}

describe("CalibrationControl", () => {
  it("drag preview leaves the acked pose untouched", () => {
    const c = new CalibrationControl(0, basePose);
    c.beginDrag();
    c.updatePreview({ yaw: 20 });
    expect(c.displayed.yaw).toBe(20);
    expect(c.lastAcked.yaw).toBe(10);
  });

  it("commit sends one SET_POSE with the changed yaw", async () => {
    const { session, calls } = fakeSession("ack");
    const c = new CalibrationControl(3, basePose);
    c.beginDrag();
    c.nudge("yaw", 10);
    const revision = await c.commit(session);
    expect(revision).toBe(42);
    expect(calls).toHaveLength(1);
    expect(calls[0].projectorId).toBe(3);
    expect(calls[0].pose.yaw).toBeCloseTo(20);
    expect(c.lastAcked.yaw).toBeCloseTo(20);
    expect(c.preview).toBeNull();
  });

  it("server ERR reverts the control to the last acked pose", async () => {
    const { session } = fakeSession("err");
    const c = new CalibrationControl(0, basePose);
    c.beginDrag();
    c.updatePreview({ yaw: 99 });
    await expect(c.commit(session)).rejects.toThrow("rejected");
    expect(c.displayed.yaw).toBe(10); // reverted
    expect(c.preview).toBeNull();
  });

  it("broadcast pose rebases an idle control", () => {
    const c = new CalibrationControl(0, basePose);
    c.rebase({ position: [5, 5, 5], yaw: 180, pitch: 1, roll: 2 });
    expect(c.displayed.yaw).toBe(180);
    expect(c.displayed.position).toEqual([5, 5, 5]);
  });

  it("broadcast mid-drag rebases the base but keeps the preview", () => {
    const c = new CalibrationControl(0, basePose);
    c.beginDrag();
    c.updatePreview({ yaw: 33 });
    c.rebase({ position: [5, 5, 5], yaw: 180, pitch: 0, roll: 0 });
    expect(c.displayed.yaw).toBe(33); // user's in-progress edit stays visible
    expect(c.lastAcked.yaw).toBe(180); // but the base moved with the server
  });

  it("commit without a preview is a no-op", async () => {
    const { session, calls } = fakeSession("ack");
    const c = new CalibrationControl(0, basePose);
    expect(await c.commit(session)).toBeNull();
    expect(calls).toHaveLength(0);
  });
});
