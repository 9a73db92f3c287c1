/** Small formatting helpers shared by the render functions. */

/** Render a non-negative timestamp as HH:MM:SS, flooring fractions. */
export function formatHms(seconds: number): string {
  const total = Math.floor(seconds);
  const hours = Math.floor(total / 3600);
  const minutes = Math.floor((total % 3600) / 60);
  const secs = total % 60;
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${pad(hours)}:${pad(minutes)}:${pad(secs)}`;
}

/** Escape text for safe interpolation into HTML templates. */
export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Format a cosine similarity for display, e.g. 0.8312 -> "0.831". */
export function formatSimilarity(value: number): string {
  return value.toFixed(3);
}

/** Format a 0..1 progress fraction as a whole percentage. */
export function formatPercent(fraction: number): string {
  return `${Math.round(fraction * 100)}%`;
}
