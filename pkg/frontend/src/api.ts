/**
 * Typed client for the knowledge-base REST service.
 *
 * Each method wraps exactly one endpoint and returns the parsed JSON body.
 * The fetch implementation is injectable so tests can stub the wire without
 * a running server. All URLs are absolute paths; the UI may be served from
 * /ui while the API lives at the root.
 */

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export type JobState =
  | "queued"
  | "sampling"
  | "describing"
  | "transcribing"
  | "indexing"
  | "done"
  | "failed";

export const JOB_STATES: readonly JobState[] = [
  "queued",
  "sampling",
  "describing",
  "transcribing",
  "indexing",
  "done",
  "failed",
];

export const TERMINAL_STATES: ReadonlySet<JobState> = new Set(["done", "failed"]);

export interface JobStatus {
  job_id: string;
  video_id: string;
  state: JobState;
  progress: number;
  error: string | null;
}

export interface VideoListing {
  video_id: string;
  chunk_count: number;
  created_at: string;
}

export interface TranscriptEntry {
  timestamp: number;
  frame_description: string;
  audio_text: string;
  frame_source: string | null;
}

export interface RollingSummary {
  start: number;
  end: number;
  text: string;
}

export interface TranscriptDoc {
  video_id: string;
  created_at: string;
  pipeline_config_digest: string;
  flags: string[];
  entries: TranscriptEntry[];
  auxiliary: {
    rolling_summaries: RollingSummary[];
    preliminary_analysis: string;
  };
}

export interface SummaryView {
  video_id: string;
  rolling_summaries: Array<RollingSummary & { label: string }>;
  preliminary_analysis: string;
}

export interface Citation {
  chunk_id: number;
  similarity: number;
  rank: number;
  header: string;
}

export interface AskResult {
  video_id: string;
  question: string;
  answer: string;
  retrieved: Citation[];
  prompt_type: string;
  k: number;
  latency_ms: number;
  model_name: string;
}

export interface IngestAccepted {
  job_id: string;
  video_id: string;
}

export interface HealthInfo {
  status: string;
  version: string;
  store_count: number;
}

/** Non-2xx response, carrying the service's "detail" message when present. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }

  listVideos(): Promise<VideoListing[]> {
    return this.request<VideoListing[]>("/videos");
  }

  startIngest(framesDir: string, videoId?: string, audioPath?: string): Promise<IngestAccepted> {
    const body: Record<string, string> = { frames_dir: framesDir };
    if (videoId) body.video_id = videoId;
    if (audioPath) body.audio_path = audioPath;
    return this.post<IngestAccepted>("/videos", body);
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/jobs/${encodeURIComponent(jobId)}`);
  }

  transcript(videoId: string): Promise<TranscriptDoc> {
    return this.request<TranscriptDoc>(`/videos/${encodeURIComponent(videoId)}/transcript`);
  }

  summary(videoId: string): Promise<SummaryView> {
    return this.request<SummaryView>(`/videos/${encodeURIComponent(videoId)}/summary`);
  }

  ask(
    videoId: string,
    question: string,
    options: { k?: number; promptType?: string } = {},
  ): Promise<AskResult> {
    const body: Record<string, unknown> = { question };
    if (options.k !== undefined) body.k = options.k;
    if (options.promptType !== undefined) body.prompt_type = options.promptType;
    return this.post<AskResult>(`/videos/${encodeURIComponent(videoId)}/ask`, body);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await readDetail(response));
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}

async function readDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body, fall through to the status text
  }
  return response.statusText || `status ${response.status}`;
}
