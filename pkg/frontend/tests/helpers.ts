/** Shared stubs and fixtures: a recording fetch, a hand-driven scheduler, canned service bodies. */

import type {
  AskResult,
  FetchLike,
  JobState,
  JobStatus,
  SummaryView,
  TranscriptDoc,
} from "../src/api.js";
import type { Scheduler } from "../src/poller.js";

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function errorResponse(status: number, detail: string): Response {
  return jsonResponse({ detail }, status);
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export interface StubRoute {
  /** Match on "METHOD /path". */
  match: string | RegExp;
  /** One response per call; the last repeats when the queue runs dry. */
  responses: Array<Response | (() => Response | Promise<Response>)>;
}

export interface FetchStub {
  fetchFn: FetchLike;
  calls: RecordedCall[];
}

/**
 * Build a fetch stub from routes. Each incoming request is recorded and
 * answered by the first matching route, consuming its response queue.
 */
export function stubFetch(routes: StubRoute[]): FetchStub {
  const calls: RecordedCall[] = [];
  const queues = routes.map((route) => ({ route, next: 0 }));

  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : null;
    calls.push({ url, method, body });
    const key = `${method} ${url}`;
    for (const entry of queues) {
      const match = entry.route.match;
      const hit = typeof match === "string" ? key === match : match.test(key);
      if (!hit) continue;
      const queue = entry.route.responses;
      const index = Math.min(entry.next, queue.length - 1);
      entry.next += 1;
      const picked = queue[index];
      const response = typeof picked === "function" ? await picked() : picked;
      return cloneResponse(response);
    }
    throw new Error(`no stub route for ${key}`);
  };

  return { fetchFn, calls };
}

// Responses are one-shot (the body stream is consumed), so repeating the
// tail of a queue needs a fresh copy each time.
function cloneResponse(response: Response): Response {
  return response.clone();
}

/** Scheduler whose timers only fire when the test says so. */
export class ManualScheduler {
  readonly pending: Array<{ fn: () => void; delayMs: number }> = [];

  readonly schedule: Scheduler = (fn, delayMs) => {
    const entry = { fn, delayMs };
    this.pending.push(entry);
    return () => {
      const at = this.pending.indexOf(entry);
      if (at >= 0) this.pending.splice(at, 1);
    };
  };

  /** Fire the oldest pending timer and let its async work settle. */
  async advance(): Promise<void> {
    const entry = this.pending.shift();
    if (entry !== undefined) entry.fn();
    await settle();
  }
}

/** Drain the microtask queue so awaited stub responses land. */
export function settle(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export function jobStatus(state: JobState, progress: number, error: string | null = null): JobStatus {
  return { job_id: "j1", video_id: "vid", state, progress, error };
}

export const TRANSCRIPT_FIXTURE: TranscriptDoc = {
  video_id: "vid",
  created_at: "2023-11-14T22:13:20Z",
  pipeline_config_digest: "0".repeat(64),
  flags: [],
  entries: [
    {
      timestamp: 0.0,
      frame_description: "a desk with a laptop and two mugs",
      audio_text: "hello and welcome",
      frame_source: "frame_0000000.png",
    },
    {
      timestamp: 1.0,
      frame_description: "a hand points at the screen",
      audio_text: "",
      frame_source: "frame_0001000.png",
    },
    {
      timestamp: 2.0,
      frame_description: "a slide with a bar chart",
      audio_text: "as the chart shows",
      frame_source: "frame_0002000.png",
    },
  ],
  auxiliary: {
    rolling_summaries: [{ start: 0.0, end: 2.0, text: "an introduction at a desk" }],
    preliminary_analysis: "a short product walkthrough",
  },
};

export const SUMMARY_FIXTURE: SummaryView = {
  video_id: "vid",
  rolling_summaries: [
    {
      start: 0.0,
      end: 2.0,
      label: "[00:00:00]-[00:00:02]",
      text: "an introduction at a desk",
    },
  ],
  preliminary_analysis: "a short product walkthrough",
};

export const EMPTY_SUMMARY_FIXTURE: SummaryView = {
  video_id: "vid",
  rolling_summaries: [],
  preliminary_analysis: "",
};

export const ASK_FIXTURE: AskResult = {
  video_id: "vid",
  question: "What is on the desk?",
  answer: "A laptop and two mugs are on the desk.",
  retrieved: [
    {
      chunk_id: 0,
      similarity: 0.9132,
      rank: 1,
      header: "[doc vid | 00:00:00–00:00:02 | frame_description]",
    },
    {
      chunk_id: 3,
      similarity: 0.5419,
      rank: 2,
      header: "[doc vid | 00:00:00–00:00:02 | audio]",
    },
  ],
  prompt_type: "type1",
  k: 5,
  latency_ms: 12.5,
  model_name: "mock-llm",
};

export const VIDEO_LISTING = [{ video_id: "vid", chunk_count: 9, created_at: "2023-11-14T22:13:20Z" }];
