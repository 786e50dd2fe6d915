import { beforeEach, describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { ReviewSession } from "../src/session.js";
import { CRITERIA_KEYS } from "../src/types.js";
import { FixtureServer } from "./fixture_server.js";

let server: FixtureServer;
let session: ReviewSession;

beforeEach(async () => {
  server = new FixtureServer();
  session = new ReviewSession(new ReviewApi("", server.fetch), "tester");
  await session.load();
});

describe("queue handling", () => {
  it("loads the pending queue and selects the first item", () => {
    expect(session.state.queue.map((q) => q.track_id)).toEqual([
      "trk-a",
      "trk-b",
      "trk-c",
    ]);
    expect(session.state.current?.track_id).toBe("trk-a");
    expect(session.state.frame).toBe(0);
  });

  it("refresh restores exact server state", async () => {
    session.scrub(3);
    session.toggleCriterion("mask_complete");
    await session.load();
    expect(session.state.frame).toBe(0);
    expect(session.state.criteria.mask_complete).toBe(true);
    expect(session.state.queue).toHaveLength(3);
  });
});

describe("frame lock", () => {
  it("all three media urls point at the same frame", () => {
    session.scrub(4);
    const urls = session.mediaUrls()!;
    for (const kind of ["rgb", "masked", "keypoints"] as const) {
      expect(urls[kind]).toBe(`/api/review/trk-a/media/${kind}?frame=4`);
    }
  });

  it("scrub clamps to the track's frame range", () => {
    session.scrub(99);
    expect(session.state.frame).toBe(5); // trk-a has 6 frames
    session.scrub(-3);
    expect(session.state.frame).toBe(0);
  });

  it("play ticks wrap around and stay frame-locked", () => {
    session.togglePlay();
    for (let i = 0; i < 7; i++) session.tick();
    expect(session.state.frame).toBe(1); // 7 ticks over 6 frames
    const urls = session.mediaUrls()!;
    expect(urls.masked).toContain("frame=1");
    expect(urls.keypoints).toContain("frame=1");
  });
});

describe("decisions", () => {
  it("accept posts the recorded schema with all criteria", async () => {
    await session.submit("accept");
    expect(server.decisions).toHaveLength(1);
    const { track_id, body } = server.decisions[0] as {
      track_id: string;
      body: { decision: string; criteria: Record<string, boolean>; reviewer: string };
    };
    expect(track_id).toBe("trk-a");
    expect(body.decision).toBe("accept");
    expect(body.reviewer).toBe("tester");
    expect(Object.keys(body.criteria).sort()).toEqual([...CRITERIA_KEYS].sort());
    expect(Object.values(body.criteria).every((v) => v === true)).toBe(true);
  });

  it("reject carries unchecked criteria in the payload", async () => {
    session.toggleCriterion("smooth_body_motion");
    await session.submit("reject");
    const body = server.decisions[0].body as { criteria: Record<string, boolean> };
    expect(body.criteria.smooth_body_motion).toBe(false);
    expect(body.criteria.mask_complete).toBe(true);
  });

  it("advances to the next item and resets state after a decision", async () => {
    session.scrub(2);
    session.toggleCriterion("mask_complete");
    await session.submit("accept");
    expect(session.state.current?.track_id).toBe("trk-b");
    expect(session.state.frame).toBe(0);
    expect(session.state.criteria.mask_complete).toBe(true);
    expect(session.state.done).toBe(1);
  });

  it("conflict on an already-decided track skips with a notice", async () => {
    server.decided.set("trk-a", "accept");
    await session.submit("accept");
    expect(session.state.notice).toContain("already decided");
    expect(session.state.current?.track_id).toBe("trk-b");
    expect(session.state.done).toBe(0);
  });

  it("drains to a null current item", async () => {
    await session.submit("accept");
    await session.submit("reject");
    await session.submit("accept");
    expect(session.state.current).toBeNull();
    const stats = await new ReviewApi("", server.fetch).stats();
    expect(stats.review).toEqual({ pending: 0, accepted: 2, rejected: 1 });
  });
});
