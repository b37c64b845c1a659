export const MAX_UPLOAD_BYTES = 10 * 1024 * 1024;

const ACCEPTED_TYPES = new Set([
  "image/png",
  "image/jpeg",
  "image/webp",
  "image/bmp",
]);

export type ValidationResult = { ok: true } | { ok: false; reason: string };

/** Client-side gate: wrong type or oversized files never reach the network. */
export function validateFile(file: { type: string; size: number }): ValidationResult {
  if (!ACCEPTED_TYPES.has(file.type)) {
    return { ok: false, reason: `Unsupported file type "${file.type || "unknown"}"; upload a PNG, JPEG, WebP, or BMP photo.` };
  }
  if (file.size > MAX_UPLOAD_BYTES) {
    const mib = (file.size / (1024 * 1024)).toFixed(1);
    return { ok: false, reason: `File is ${mib} MiB; the limit is 10 MiB.` };
  }
  return { ok: true };
}
