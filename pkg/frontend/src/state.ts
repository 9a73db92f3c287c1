/**
 * Session state and its transitions.
 *
 * The view is a pure function of this state, and the state itself is a pure
 * fold over service responses plus the local input fields: every transition
 * takes the previous state and returns a fresh one, so replaying a recorded
 * response sequence reproduces the exact same view.
 */

import type {
  AskResult,
  IngestAccepted,
  JobState,
  JobStatus,
  SummaryView,
  TranscriptDoc,
  VideoListing,
} from "./api.js";

export type PromptType = "type1" | "type2";

export interface DialogueEntry {
  question: string;
  answer: string;
}

export type AskPhase = "idle" | "pending" | "answered" | "error";

export interface AskPane {
  phase: AskPhase;
  /** Question belonging to the in-flight or most recent ask. */
  question: string;
  result: AskResult | null;
  error: { status: number; detail: string } | null;
}

export interface InputFields {
  question: string;
  k: number;
  promptType: PromptType;
  framesDir: string;
  audioPath: string;
  videoId: string;
}

export interface SessionState {
  videos: VideoListing[];
  activeVideo: string | null;
  job: JobStatus | null;
  /** Distinct job states observed for the current job, in arrival order. */
  jobTrail: JobState[];
  ingestError: string | null;
  transcript: TranscriptDoc | null;
  summary: SummaryView | null;
  dialogue: DialogueEntry[];
  ask: AskPane;
  inputs: InputFields;
}

export function initialState(): SessionState {
  return {
    videos: [],
    activeVideo: null,
    job: null,
    jobTrail: [],
    ingestError: null,
    transcript: null,
    summary: null,
    dialogue: [],
    ask: { phase: "idle", question: "", result: null, error: null },
    inputs: {
      question: "",
      k: 5,
      promptType: "type1",
      framesDir: "",
      audioPath: "",
      videoId: "",
    },
  };
}

export function videosLoaded(state: SessionState, videos: VideoListing[]): SessionState {
  return { ...state, videos };
}

export function videoSelected(state: SessionState, videoId: string): SessionState {
  if (videoId === state.activeVideo) return state;
  return {
    ...state,
    activeVideo: videoId,
    transcript: null,
    summary: null,
    ask: { phase: "idle", question: "", result: null, error: null },
  };
}

/** The service accepted an ingest request; jobs start in the queued state. */
export function jobAccepted(state: SessionState, accepted: IngestAccepted): SessionState {
  return {
    ...state,
    activeVideo: accepted.video_id,
    job: {
      job_id: accepted.job_id,
      video_id: accepted.video_id,
      state: "queued",
      progress: 0,
      error: null,
    },
    jobTrail: ["queued"],
    ingestError: null,
    transcript: null,
    summary: null,
  };
}

/** Re-attach to a job after a reload; the banner fills in from the next poll. */
export function jobAttached(state: SessionState, jobId: string, videoId: string): SessionState {
  return {
    ...state,
    activeVideo: videoId,
    job: { job_id: jobId, video_id: videoId, state: "queued", progress: 0, error: null },
    jobTrail: [],
    ingestError: null,
  };
}

export function jobUpdated(state: SessionState, status: JobStatus): SessionState {
  if (state.job !== null && state.job.job_id !== status.job_id) return state;
  const trail =
    state.jobTrail.length > 0 && state.jobTrail[state.jobTrail.length - 1] === status.state
      ? state.jobTrail
      : [...state.jobTrail, status.state];
  return { ...state, job: status, jobTrail: trail };
}

/** The ingest request itself was rejected (bad paths, duplicate job). */
export function ingestRejected(state: SessionState, detail: string): SessionState {
  return { ...state, ingestError: detail };
}

export function transcriptLoaded(state: SessionState, doc: TranscriptDoc): SessionState {
  if (state.activeVideo !== doc.video_id) return state;
  return { ...state, transcript: doc };
}

export function summaryLoaded(state: SessionState, summary: SummaryView): SessionState {
  if (state.activeVideo !== summary.video_id) return state;
  return { ...state, summary };
}

export function askStarted(state: SessionState, question: string): SessionState {
  return { ...state, ask: { phase: "pending", question, result: null, error: null } };
}

export function askAnswered(state: SessionState, result: AskResult): SessionState {
  return {
    ...state,
    ask: { phase: "answered", question: result.question, result, error: null },
    dialogue: [...state.dialogue, { question: result.question, answer: result.answer }],
    inputs: { ...state.inputs, question: "" },
  };
}

/** A failed ask renders as an error card; the dialogue history is untouched. */
export function askFailed(
  state: SessionState,
  question: string,
  status: number,
  detail: string,
): SessionState {
  return { ...state, ask: { phase: "error", question, result: null, error: { status, detail } } };
}

export function inputsChanged(state: SessionState, patch: Partial<InputFields>): SessionState {
  return { ...state, inputs: { ...state.inputs, ...patch } };
}

export interface AskGuard {
  disabled: boolean;
  hint: string | null;
}

/**
 * Whether the ask form may submit right now, and the hint shown when it
 * may not. Asking requires a selected video whose ingest (if any) is done,
 * a non-empty question, and no answer already in flight.
 */
export function askGuard(state: SessionState): AskGuard {
  if (state.activeVideo === null) {
    return { disabled: true, hint: "Select or ingest a video first." };
  }
  if (state.job !== null && state.job.video_id === state.activeVideo && state.job.state !== "done") {
    if (state.job.state === "failed") {
      return { disabled: true, hint: "Ingest failed; start a new one." };
    }
    return { disabled: true, hint: "Wait for the ingest to finish." };
  }
  if (state.ask.phase === "pending") {
    return { disabled: true, hint: "Waiting for the current answer." };
  }
  if (state.inputs.question.trim() === "") {
    return { disabled: true, hint: "Type a question." };
  }
  return { disabled: false, hint: null };
}
