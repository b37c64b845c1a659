import { roiWithinBounds } from "./roi.js";
import type { Preview, RoiRect, ScreeningResponse } from "./types.js";

export type SubmissionStatus = "idle" | "uploading" | "done" | "error";

export interface UploadState {
  file: File | null;
  preview: Preview | null;
  roi: RoiRect | null; // natural image coordinates
  status: SubmissionStatus;
  response: ScreeningResponse | null;
  errorDetail: string | null;
}

export function initialState(): UploadState {
  return { file: null, preview: null, roi: null, status: "idle", response: null, errorDetail: null };
}

/** A new file resets everything downstream of selection. */
export function withSelectedFile(state: UploadState, file: File, preview: Preview): UploadState {
  return { ...initialState(), file, preview };
}

export function withRoi(state: UploadState, roi: RoiRect | null): UploadState {
  if (roi !== null) {
    if (!state.preview) throw new Error("roi set without a preview");
    if (!roiWithinBounds(roi, state.preview.width, state.preview.height)) {
      throw new Error("roi outside preview bounds");
    }
  }
  return { ...state, roi };
}

export function canSubmit(state: UploadState): boolean {
  return state.file !== null && state.status !== "uploading";
}

export function startUpload(state: UploadState): UploadState {
  if (!canSubmit(state)) throw new Error(`cannot submit in status ${state.status}`);
  return { ...state, status: "uploading", response: null, errorDetail: null };
}

export function resolveUpload(state: UploadState, response: ScreeningResponse): UploadState {
  if (state.status !== "uploading") throw new Error("resolve outside an upload");
  return { ...state, status: "done", response, errorDetail: null };
}

export function failUpload(state: UploadState, detail: string): UploadState {
  if (state.status !== "uploading") throw new Error("fail outside an upload");
  return { ...state, status: "error", response: null, errorDetail: detail };
}

/** The result view is renderable only when a submission has finished. */
export function resultVisible(state: UploadState): state is UploadState & { response: ScreeningResponse } {
  return state.status === "done" && state.response !== null;
}
