import type { RoiRect, ScreeningResponse } from "./types.js";

/** Non-2xx reply from the screening service, with its stated reason. */
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly reason: string,
  ) {
    super(`screening service replied ${status}: ${reason}`);
    this.name = "ServiceError";
  }
}

/**
 * POST the photo (and optional ROI in source pixels) to /api/v1/predict.
 * Network failures reject with the underlying fetch error; HTTP errors
 * reject with ServiceError. No retries here: the UI owns retry.
 */
export async function submitForScreening(
  baseUrl: string,
  file: File,
  roi?: RoiRect | null,
): Promise<ScreeningResponse> {
  const form = new FormData();
  form.append("file", file, file.name);
  if (roi) {
    form.append("x", String(roi.x));
    form.append("y", String(roi.y));
    form.append("w", String(roi.w));
    form.append("h", String(roi.h));
  }
  const response = await fetch(`${baseUrl}/api/v1/predict`, {
    method: "POST",
    body: form,
  });
  if (!response.ok) {
    let reason = response.statusText || `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) reason = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ServiceError(response.status, reason);
  }
  return (await response.json()) as ScreeningResponse;
}
