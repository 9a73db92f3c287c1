import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { renderAskForm, renderQaColumn } from "../src/views.js";
import {
  ASK_FIXTURE,
  SUMMARY_FIXTURE,
  TRANSCRIPT_FIXTURE,
  VIDEO_LISTING,
  errorResponse,
  jsonResponse,
  stubFetch,
} from "./helpers.js";

import type { StubRoute } from "./helpers.js";

function paneRoutes(): StubRoute[] {
  return [
    { match: "GET /videos", responses: [jsonResponse(VIDEO_LISTING)] },
    { match: "GET /videos/vid/transcript", responses: [jsonResponse(TRANSCRIPT_FIXTURE)] },
    { match: "GET /videos/vid/summary", responses: [jsonResponse(SUMMARY_FIXTURE)] },
  ];
}

async function selectedController(routes: StubRoute[]) {
  const stub = stubFetch(routes);
  const controller = new SessionController(new ServiceClient("", stub.fetchFn));
  await controller.refreshVideos();
  await controller.selectVideo("vid");
  return { controller, stub };
}

describe("ask flow", () => {
  it("renders the stubbed answer as a card with chunk citations", async () => {
    const { controller, stub } = await selectedController([
      ...paneRoutes(),
      { match: "POST /videos/vid/ask", responses: [jsonResponse(ASK_FIXTURE)] },
    ]);

    controller.setInputs({ question: "What is on the desk?" });
    await controller.submitQuestion();

    const state = controller.current();
    expect(state.ask.phase).toBe("answered");
    const html = renderQaColumn(state);
    expect(html).toContain("A laptop and two mugs are on the desk.");
    expect(html).toContain("[doc vid | 00:00:00–00:00:02 | frame_description]");
    expect(html).toContain("[doc vid | 00:00:00–00:00:02 | audio]");
    expect(html).toContain("rank 1");
    expect(html).toContain("rank 2");

    const askCall = stub.calls.find((call) => call.url === "/videos/vid/ask");
    expect(askCall?.body).toEqual({ question: "What is on the desk?", k: 5, prompt_type: "type1" });
    expect(state.dialogue).toEqual([
      { question: "What is on the desk?", answer: "A laptop and two mugs are on the desk." },
    ]);
  });

  it("keeps the submit disabled with a hint when no video is selected", () => {
    const stub = stubFetch([]);
    const controller = new SessionController(new ServiceClient("", stub.fetchFn));

    const html = renderAskForm(controller.current());

    expect(html).toContain("disabled");
    expect(html).toContain("Select or ingest a video first.");
    expect(stub.calls).toHaveLength(0);
  });

  it("does not send an ask while the guard is closed", async () => {
    const stub = stubFetch([]);
    const controller = new SessionController(new ServiceClient("", stub.fetchFn));

    controller.setInputs({ question: "anything" });
    await controller.submitQuestion();

    expect(stub.calls).toHaveLength(0);
    expect(controller.current().ask.phase).toBe("idle");
  });

  it("renders a 500 as an error card and leaves the history unchanged", async () => {
    const { controller } = await selectedController([
      ...paneRoutes(),
      {
        match: "POST /videos/vid/ask",
        responses: [errorResponse(500, "[generate] text provider unavailable")],
      },
    ]);

    controller.setInputs({ question: "What is on the desk?" });
    await controller.submitQuestion();

    const state = controller.current();
    expect(state.ask.phase).toBe("error");
    expect(state.dialogue).toEqual([]);
    const html = renderQaColumn(state);
    expect(html).toContain("Request failed (500)");
    expect(html).toContain("[generate] text provider unavailable");
    expect(html).toContain("data-action=\"retry-ask\"");
  });

  it("retries the failed question and then records the answer", async () => {
    const { controller, stub } = await selectedController([
      ...paneRoutes(),
      {
        match: "POST /videos/vid/ask",
        responses: [errorResponse(503, "embedding backend restarting"), jsonResponse(ASK_FIXTURE)],
      },
    ]);

    controller.setInputs({ question: "What is on the desk?" });
    await controller.submitQuestion();
    expect(controller.current().ask.phase).toBe("error");

    await controller.retryAsk();

    const state = controller.current();
    expect(state.ask.phase).toBe("answered");
    expect(state.dialogue).toHaveLength(1);
    const askCalls = stub.calls.filter((call) => call.url === "/videos/vid/ask");
    expect(askCalls).toHaveLength(2);
    expect(askCalls[1].body).toMatchObject({ question: "What is on the desk?" });
  });

  it("allows at most one ask in flight", async () => {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    const { controller, stub } = await selectedController([
      ...paneRoutes(),
      {
        match: "POST /videos/vid/ask",
        responses: [
          async () => {
            await gate;
            return jsonResponse(ASK_FIXTURE);
          },
        ],
      },
    ]);

    controller.setInputs({ question: "What is on the desk?" });
    const first = controller.submitQuestion();
    const second = controller.submitQuestion();

    release();
    await Promise.all([first, second]);

    const askCalls = stub.calls.filter((call) => call.url === "/videos/vid/ask");
    expect(askCalls).toHaveLength(1);
    expect(controller.current().ask.phase).toBe("answered");
  });

  it("sends the selected prompt type and k with the question", async () => {
    const { controller, stub } = await selectedController([
      ...paneRoutes(),
      { match: "POST /videos/vid/ask", responses: [jsonResponse(ASK_FIXTURE)] },
    ]);

    controller.setInputs({ question: "Summarize the intro.", k: 2, promptType: "type2" });
    await controller.submitQuestion();

    const askCall = stub.calls.find((call) => call.url === "/videos/vid/ask");
    expect(askCall?.body).toEqual({ question: "Summarize the intro.", k: 2, prompt_type: "type2" });
  });
});
