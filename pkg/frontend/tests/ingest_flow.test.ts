import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import type { JobState } from "../src/api.js";
import { SessionController, memoryStorage } from "../src/controller.js";
import type { SessionState } from "../src/state.js";
import { renderBanner } from "../src/views.js";
import {
  ManualScheduler,
  SUMMARY_FIXTURE,
  TRANSCRIPT_FIXTURE,
  VIDEO_LISTING,
  errorResponse,
  jobStatus,
  jsonResponse,
  settle,
  stubFetch,
} from "./helpers.js";

import type { StubRoute } from "./helpers.js";

const ACCEPT_ROUTE: StubRoute = {
  match: "POST /videos",
  responses: [jsonResponse({ job_id: "j1", video_id: "vid" }, 202)],
};

const DONE_ROUTES: StubRoute[] = [
  { match: "GET /videos", responses: [jsonResponse(VIDEO_LISTING)] },
  { match: "GET /videos/vid/transcript", responses: [jsonResponse(TRANSCRIPT_FIXTURE)] },
  { match: "GET /videos/vid/summary", responses: [jsonResponse(SUMMARY_FIXTURE)] },
];

function makeController(routes: StubRoute[], storage = memoryStorage()) {
  const stub = stubFetch(routes);
  const scheduler = new ManualScheduler();
  const seen: SessionState[] = [];
  const controller = new SessionController(
    new ServiceClient("", stub.fetchFn),
    (state) => seen.push(state),
    storage,
    scheduler.schedule,
  );
  return { controller, stub, scheduler, seen, storage };
}

describe("ingest flow", () => {
  it("walks the banner through every job state in order", async () => {
    const { controller, scheduler, seen } = makeController([
      ACCEPT_ROUTE,
      {
        match: "GET /jobs/j1",
        responses: [
          jsonResponse(jobStatus("queued", 0.0)),
          jsonResponse(jobStatus("sampling", 0.25)),
          jsonResponse(jobStatus("describing", 0.5)),
          jsonResponse(jobStatus("transcribing", 0.75)),
          jsonResponse(jobStatus("indexing", 0.9)),
          jsonResponse(jobStatus("done", 1.0)),
        ],
      },
      ...DONE_ROUTES,
    ]);

    controller.setInputs({ framesDir: "/data/frames/vid" });
    await controller.startIngest();
    await settle();
    for (let i = 0; i < 5; i += 1) {
      await scheduler.advance();
    }

    expect(controller.current().jobTrail).toEqual([
      "queued",
      "sampling",
      "describing",
      "transcribing",
      "indexing",
      "done",
    ]);
    const bannerStates = seen
      .map((state) => state.job?.state)
      .filter((value): value is JobState => value !== undefined);
    const distinct = bannerStates.filter((value, i) => i === 0 || value !== bannerStates[i - 1]);
    expect(distinct).toEqual(["queued", "sampling", "describing", "transcribing", "indexing", "done"]);
    expect(scheduler.pending).toHaveLength(0);
  });

  it("loads the transcript and summary panes once the job is done", async () => {
    const { controller, scheduler, storage } = makeController([
      ACCEPT_ROUTE,
      {
        match: "GET /jobs/j1",
        responses: [jsonResponse(jobStatus("indexing", 0.9)), jsonResponse(jobStatus("done", 1.0))],
      },
      ...DONE_ROUTES,
    ]);

    controller.setInputs({ framesDir: "/data/frames/vid" });
    await controller.startIngest();
    await settle();
    await scheduler.advance();
    await settle();

    const state = controller.current();
    expect(state.job?.state).toBe("done");
    expect(state.transcript?.entries).toHaveLength(3);
    expect(state.summary?.rolling_summaries).toHaveLength(1);
    expect(state.videos).toHaveLength(1);
    expect(storage.get("multirag.activeJob")).toBeNull();
  });

  it("shows the failing stage in the banner when the job fails", async () => {
    const { controller, scheduler, storage } = makeController([
      ACCEPT_ROUTE,
      {
        match: "GET /jobs/j1",
        responses: [
          jsonResponse(jobStatus("queued", 0.0)),
          jsonResponse(jobStatus("sampling", 0.25)),
          jsonResponse(jobStatus("failed", 1.0, "[describing] frame description failed for 4 of 6 frames")),
        ],
      },
    ]);

    controller.setInputs({ framesDir: "/data/frames/vid" });
    await controller.startIngest();
    await settle();
    await scheduler.advance();
    await scheduler.advance();

    const state = controller.current();
    expect(state.job?.state).toBe("failed");
    const html = renderBanner(state);
    expect(html).toContain("failed during describing");
    expect(html).toContain("frame description failed for 4 of 6 frames");
    expect(scheduler.pending).toHaveLength(0);
    expect(storage.get("multirag.activeJob")).toBeNull();
  });

  it("surfaces a rejected ingest request without starting a poll", async () => {
    const { controller, scheduler } = makeController([
      {
        match: "POST /videos",
        responses: [errorResponse(400, "frame directory not found: /missing")],
      },
    ]);

    controller.setInputs({ framesDir: "/missing" });
    await controller.startIngest();

    const state = controller.current();
    expect(state.job).toBeNull();
    expect(renderBanner(state)).toContain("frame directory not found: /missing");
    expect(scheduler.pending).toHaveLength(0);
  });

  it("resumes the banner from the polled state after a reload", async () => {
    const storage = memoryStorage();
    storage.set("multirag.activeJob", JSON.stringify({ job_id: "j1", video_id: "vid" }));
    const { controller, scheduler } = makeController(
      [
        {
          match: "GET /jobs/j1",
          responses: [jsonResponse(jobStatus("indexing", 0.9)), jsonResponse(jobStatus("done", 1.0))],
        },
        ...DONE_ROUTES,
      ],
      storage,
    );

    expect(controller.resume()).toBe(true);
    await settle();

    const resumed = controller.current();
    expect(resumed.job?.state).toBe("indexing");
    expect(resumed.jobTrail).toEqual(["indexing"]);
    expect(renderBanner(resumed)).toContain("indexing");

    await scheduler.advance();
    await settle();
    expect(controller.current().job?.state).toBe("done");
  });

  it("does not resume when nothing was stored", () => {
    const { controller, stub } = makeController([]);

    expect(controller.resume()).toBe(false);
    expect(stub.calls).toHaveLength(0);
  });
});
