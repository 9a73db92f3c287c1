/**
 * Glue between the REST client, the job poller, and the session state.
 *
 * The controller owns the single mutable reference to the state; every
 * change goes through a pure transition and is announced via onChange.
 * At most one ask is in flight per session, and the active job id is
 * kept in (injectable) storage so a reload can re-attach to a running
 * ingest and resume the banner from the next polled status.
 */

import { ApiError, ServiceClient } from "./api.js";
import type { JobStatus } from "./api.js";
import { JobPoller } from "./poller.js";
import type { Scheduler } from "./poller.js";
import {
  askAnswered,
  askFailed,
  askGuard,
  askStarted,
  ingestRejected,
  initialState,
  inputsChanged,
  jobAccepted,
  jobAttached,
  jobUpdated,
  summaryLoaded,
  transcriptLoaded,
  videoSelected,
  videosLoaded,
} from "./state.js";
import type { InputFields, SessionState } from "./state.js";

export interface KeyValueStorage {
  get(key: string): string | null;
  set(key: string, value: string): void;
  remove(key: string): void;
}

export function memoryStorage(): KeyValueStorage {
  const data = new Map<string, string>();
  return {
    get: (key) => data.get(key) ?? null,
    set: (key, value) => void data.set(key, value),
    remove: (key) => void data.delete(key),
  };
}

const JOB_KEY = "multirag.activeJob";

export class SessionController {
  private state: SessionState = initialState();
  private readonly poller: JobPoller;
  private askInFlight = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly onChange: (state: SessionState) => void = () => {},
    private readonly storage: KeyValueStorage = memoryStorage(),
    scheduler?: Scheduler,
  ) {
    this.poller = new JobPoller(
      client,
      (status) => this.handleJobStatus(status),
      () => {},
      scheduler,
    );
  }

  current(): SessionState {
    return this.state;
  }

  async refreshVideos(): Promise<void> {
    const videos = await this.client.listVideos();
    this.commit(videosLoaded(this.state, videos));
  }

  async selectVideo(videoId: string): Promise<void> {
    this.commit(videoSelected(this.state, videoId));
    await this.loadPanes(videoId);
  }

  async startIngest(): Promise<void> {
    const { framesDir, videoId, audioPath } = this.state.inputs;
    let accepted;
    try {
      accepted = await this.client.startIngest(
        framesDir.trim(),
        videoId.trim() || undefined,
        audioPath.trim() || undefined,
      );
    } catch (error) {
      this.commit(ingestRejected(this.state, describeError(error)));
      return;
    }
    this.storage.set(JOB_KEY, JSON.stringify(accepted));
    this.commit(jobAccepted(this.state, accepted));
    this.poller.start(accepted.job_id);
  }

  /** Re-attach to a stored job after a reload; true when one was found. */
  resume(): boolean {
    const raw = this.storage.get(JOB_KEY);
    if (raw === null) return false;
    let stored: { job_id?: unknown; video_id?: unknown };
    try {
      stored = JSON.parse(raw) as { job_id?: unknown; video_id?: unknown };
    } catch {
      this.storage.remove(JOB_KEY);
      return false;
    }
    if (typeof stored.job_id !== "string" || typeof stored.video_id !== "string") {
      this.storage.remove(JOB_KEY);
      return false;
    }
    this.commit(jobAttached(this.state, stored.job_id, stored.video_id));
    this.poller.start(stored.job_id);
    return true;
  }

  async submitQuestion(): Promise<void> {
    if (askGuard(this.state).disabled) return;
    await this.performAsk(this.state.inputs.question.trim());
  }

  async retryAsk(): Promise<void> {
    if (this.state.ask.phase !== "error") return;
    await this.performAsk(this.state.ask.question);
  }

  /**
   * Update input fields. Silent by default: keystrokes should not force a
   * full re-render (which would steal focus), but the values still live in
   * the state so the next render reflects them.
   */
  setInputs(patch: Partial<InputFields>, options: { render?: boolean } = {}): void {
    this.state = inputsChanged(this.state, patch);
    if (options.render) this.onChange(this.state);
  }

  stop(): void {
    this.poller.stop();
  }

  private commit(next: SessionState): void {
    this.state = next;
    this.onChange(next);
  }

  private async loadPanes(videoId: string): Promise<void> {
    try {
      const [doc, summary] = await Promise.all([
        this.client.transcript(videoId),
        this.client.summary(videoId),
      ]);
      if (this.state.activeVideo !== videoId) return;
      this.commit(summaryLoaded(transcriptLoaded(this.state, doc), summary));
    } catch {
      // missing store: the panes keep their placeholders
    }
  }

  private handleJobStatus(status: JobStatus): void {
    this.commit(jobUpdated(this.state, status));
    if (status.state === "done") {
      this.storage.remove(JOB_KEY);
      void this.refreshVideos();
      void this.loadPanes(status.video_id);
    } else if (status.state === "failed") {
      this.storage.remove(JOB_KEY);
    }
  }

  private async performAsk(question: string): Promise<void> {
    if (this.askInFlight) return;
    const videoId = this.state.activeVideo;
    if (videoId === null) return;
    this.askInFlight = true;
    this.commit(askStarted(this.state, question));
    try {
      const result = await this.client.ask(videoId, question, {
        k: this.state.inputs.k,
        promptType: this.state.inputs.promptType,
      });
      this.commit(askAnswered(this.state, result));
    } catch (error) {
      const status = error instanceof ApiError ? error.status : 0;
      this.commit(askFailed(this.state, question, status, describeError(error)));
    } finally {
      this.askInFlight = false;
    }
  }
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return error.detail;
  if (error instanceof Error) return error.message;
  return String(error);
}
