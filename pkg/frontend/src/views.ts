/**
 * Pure render functions: session state in, HTML strings out.
 *
 * Nothing here touches the DOM or the network, which keeps every view
 * checkable in plain node tests. The three columns render independently,
 * so an empty session shows placeholders instead of crashing.
 */

import type { SessionState } from "./state.js";
import { askGuard } from "./state.js";
import { escapeHtml, formatHms, formatPercent, formatSimilarity } from "./format.js";

/** Pull the stage label out of a "[stage] message" error string. */
export function splitStageError(error: string): { stage: string | null; message: string } {
  const match = /^\[([a-z_]+)\]\s*(.*)$/s.exec(error);
  if (match) return { stage: match[1], message: match[2] };
  return { stage: null, message: error };
}

export function renderBanner(state: SessionState): string {
  if (state.ingestError !== null) {
    return `<div class="banner banner-failed">ingest rejected: ${escapeHtml(state.ingestError)}</div>`;
  }
  const job = state.job;
  if (job === null) {
    return `<div class="banner banner-idle">no ingest running</div>`;
  }
  if (job.state === "failed") {
    const { stage, message } = splitStageError(job.error ?? "unknown error");
    const where = stage === null ? "" : ` during ${escapeHtml(stage)}`;
    return (
      `<div class="banner banner-failed">ingest of ${escapeHtml(job.video_id)} failed` +
      `${where}: ${escapeHtml(message)}</div>`
    );
  }
  if (job.state === "done") {
    return `<div class="banner banner-done">ingest of ${escapeHtml(job.video_id)} done</div>`;
  }
  return (
    `<div class="banner banner-running">ingesting ${escapeHtml(job.video_id)}: ` +
    `${escapeHtml(job.state)} ${formatPercent(job.progress)}</div>`
  );
}

export function renderIngestForm(state: SessionState): string {
  const inputs = state.inputs;
  return `<form class="ingest-form" data-form="ingest">
  <label>Frame directory
    <input name="framesDir" type="text" value="${escapeHtml(inputs.framesDir)}" placeholder="/data/frames/demo">
  </label>
  <label>Audio file (optional)
    <input name="audioPath" type="text" value="${escapeHtml(inputs.audioPath)}" placeholder="/data/audio/demo.wav">
  </label>
  <label>Video id (optional)
    <input name="videoId" type="text" value="${escapeHtml(inputs.videoId)}" placeholder="demo">
  </label>
  <button type="submit" data-action="ingest">Ingest</button>
</form>`;
}

export function renderVideoList(state: SessionState): string {
  if (state.videos.length === 0) {
    return `<p class="placeholder">(no videos ingested yet)</p>`;
  }
  const items = state.videos
    .map((video) => {
      const active = video.video_id === state.activeVideo ? " active" : "";
      return (
        `<li class="video-item${active}" data-action="select-video" data-video-id="${escapeHtml(video.video_id)}">` +
        `${escapeHtml(video.video_id)} <span class="meta">${video.chunk_count} chunks</span></li>`
      );
    })
    .join("\n");
  return `<ul class="video-list">\n${items}\n</ul>`;
}

export function renderAskForm(state: SessionState): string {
  const guard = askGuard(state);
  const disabled = guard.disabled ? " disabled" : "";
  const hint = guard.hint === null ? "" : `\n  <p class="hint">${escapeHtml(guard.hint)}</p>`;
  const type1 = state.inputs.promptType === "type1" ? " selected" : "";
  const type2 = state.inputs.promptType === "type2" ? " selected" : "";
  return `<form class="ask-form" data-form="ask">
  <input name="question" type="text" value="${escapeHtml(state.inputs.question)}" placeholder="Ask about the video">
  <select name="promptType">
    <option value="type1"${type1}>Response type 1 (detailed)</option>
    <option value="type2"${type2}>Response type 2 (concise)</option>
  </select>
  <input name="k" type="number" min="1" value="${state.inputs.k}">
  <button type="submit" data-action="ask"${disabled}>Ask</button>${hint}
</form>`;
}

export function renderQaColumn(state: SessionState): string {
  const ask = state.ask;
  if (ask.phase === "idle") {
    return `<p class="placeholder">(no question asked yet)</p>`;
  }
  if (ask.phase === "pending") {
    return `<div class="qa-card qa-pending">
  <p class="question">${escapeHtml(ask.question)}</p>
  <p class="thinking">Waiting for the answer...</p>
</div>`;
  }
  if (ask.phase === "error") {
    const error = ask.error ?? { status: 0, detail: "unknown error" };
    return `<div class="qa-card qa-error">
  <p class="question">${escapeHtml(ask.question)}</p>
  <p class="error-detail">Request failed (${error.status}): ${escapeHtml(error.detail)}</p>
  <button type="button" data-action="retry-ask">Retry</button>
</div>`;
  }
  const result = ask.result;
  if (result === null) {
    return `<p class="placeholder">(no question asked yet)</p>`;
  }
  const citations = result.retrieved
    .map(
      (hit) =>
        `<li class="citation">${escapeHtml(hit.header)} ` +
        `<span class="meta">rank ${hit.rank}, sim ${formatSimilarity(hit.similarity)}</span></li>`,
    )
    .join("\n");
  return `<div class="qa-card qa-answered">
  <p class="question">${escapeHtml(result.question)}</p>
  <p class="answer">${escapeHtml(result.answer)}</p>
  <ul class="citations">
${citations}
  </ul>
  <p class="meta">${escapeHtml(result.model_name)}, ${escapeHtml(result.prompt_type)}, k=${result.k}</p>
</div>`;
}

export function renderDialogueColumn(state: SessionState): string {
  if (state.dialogue.length === 0) {
    return `<p class="placeholder">(no dialogue yet)</p>`;
  }
  const turns = state.dialogue
    .map(
      (entry) => `<div class="turn">
  <p class="turn-question">${escapeHtml(entry.question)}</p>
  <p class="turn-answer">${escapeHtml(entry.answer)}</p>
</div>`,
    )
    .join("\n");
  return `<div class="dialogue">\n${turns}\n</div>`;
}

function renderSummaries(state: SessionState): string {
  const summary = state.summary;
  const rolling = summary?.rolling_summaries ?? [];
  const analysis = summary?.preliminary_analysis ?? "";
  if (rolling.length === 0 && analysis === "") {
    return `<section class="summaries">
  <h3>Summaries</h3>
  <p class="placeholder">(none)</p>
</section>`;
  }
  const blocks: string[] = [];
  for (const item of rolling) {
    blocks.push(
      `<div class="summary-block"><span class="stamp">${escapeHtml(item.label)}</span> ` +
        `${escapeHtml(item.text)}</div>`,
    );
  }
  if (analysis !== "") {
    blocks.push(`<div class="summary-block overall">${escapeHtml(analysis)}</div>`);
  }
  return `<section class="summaries">
  <h3>Summaries</h3>
${blocks.join("\n")}
</section>`;
}

function renderTimeline(state: SessionState): string {
  const doc = state.transcript;
  if (doc === null || doc.entries.length === 0) {
    return `<section class="timeline">
  <h3>Transcript</h3>
  <p class="placeholder">(no transcript loaded)</p>
</section>`;
  }
  const rows = doc.entries
    .map((entry) => {
      const audio =
        entry.audio_text === ""
          ? ""
          : `\n  <blockquote class="audio">&quot;${escapeHtml(entry.audio_text)}&quot;</blockquote>`;
      return `<div class="entry">
  <span class="stamp">[${formatHms(entry.timestamp)}]</span>
  <span class="description">${escapeHtml(entry.frame_description)}</span>${audio}
</div>`;
    })
    .join("\n");
  return `<section class="timeline">
  <h3>Transcript</h3>
${rows}
</section>`;
}

/** Right column: rolling summaries on top, frame timeline below. */
export function renderTranscriptPane(state: SessionState): string {
  return `${renderSummaries(state)}\n${renderTimeline(state)}`;
}

/** Full three-column session view plus the banner and forms. */
export function renderSession(state: SessionState): string {
  return `<header class="topbar">
${renderBanner(state)}
${renderIngestForm(state)}
</header>
<main class="columns">
<section class="column column-dialogue">
<h2>Dialogue</h2>
${renderDialogueColumn(state)}
</section>
<section class="column column-qa">
<h2>Q&amp;A</h2>
${renderAskForm(state)}
${renderQaColumn(state)}
</section>
<section class="column column-transcript">
<h2>Video knowledge</h2>
${renderVideoList(state)}
${renderTranscriptPane(state)}
</section>
</main>`;
}
