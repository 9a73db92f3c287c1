/**
 * Job status polling at a fixed 1 s interval.
 *
 * The scheduler is injectable so tests can drive the clock by hand; the
 * default uses setTimeout. Polling stops on its own once the job reaches
 * a terminal state, and a 404 (job unknown to the service) also stops it
 * since retrying would never change the outcome.
 */

import { ApiError, TERMINAL_STATES } from "./api.js";
import type { JobStatus, ServiceClient } from "./api.js";

export const POLL_INTERVAL_MS = 1000;

export type CancelFn = () => void;
export type Scheduler = (fn: () => void, delayMs: number) => CancelFn;

export const timeoutScheduler: Scheduler = (fn, delayMs) => {
  const handle = setTimeout(fn, delayMs);
  return () => clearTimeout(handle);
};

export class JobPoller {
  private cancel: CancelFn | null = null;
  private active = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly onStatus: (status: JobStatus) => void,
    private readonly onError: (error: unknown) => void = () => {},
    private readonly scheduler: Scheduler = timeoutScheduler,
    private readonly intervalMs: number = POLL_INTERVAL_MS,
  ) {}

  /** Begin polling, with an immediate first request. */
  start(jobId: string): void {
    this.stop();
    this.active = true;
    void this.tick(jobId);
  }

  stop(): void {
    this.active = false;
    if (this.cancel !== null) {
      this.cancel();
      this.cancel = null;
    }
  }

  get running(): boolean {
    return this.active;
  }

  private async tick(jobId: string): Promise<void> {
    if (!this.active) return;
    let status: JobStatus;
    try {
      status = await this.client.jobStatus(jobId);
    } catch (error) {
      this.onError(error);
      if (error instanceof ApiError && error.status === 404) {
        this.active = false;
        return;
      }
      this.scheduleNext(jobId);
      return;
    }
    if (!this.active) return;
    this.onStatus(status);
    if (TERMINAL_STATES.has(status.state)) {
      this.active = false;
      return;
    }
    this.scheduleNext(jobId);
  }

  private scheduleNext(jobId: string): void {
    if (!this.active) return;
    this.cancel = this.scheduler(() => {
      this.cancel = null;
      void this.tick(jobId);
    }, this.intervalMs);
  }
}
