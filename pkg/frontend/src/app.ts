import { ServiceError, submitForScreening } from "./api.js";
import { clampToBounds, normalizeDrag, toNaturalCoords } from "./roi.js";
import {
  UploadState,
  canSubmit,
  failUpload,
  initialState,
  resolveUpload,
  resultVisible,
  startUpload,
  withRoi,
  withSelectedFile,
} from "./state.js";
import type { Preview, RoiRect } from "./types.js";
import { validateFile } from "./validate.js";

export type PreviewDecoder = (file: File) => Promise<Preview>;

/** Read the file into a data URL and let the browser report its size. */
export const defaultPreviewDecoder: PreviewDecoder = (file) =>
  new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(new Error("could not read the selected file"));
    reader.onload = () => {
      const dataUrl = reader.result as string;
      const image = new Image();
      image.onerror = () => reject(new Error("could not decode the selected image"));
      image.onload = () =>
        resolve({ dataUrl, width: image.naturalWidth, height: image.naturalHeight });
      image.src = dataUrl;
    };
    reader.readAsDataURL(file);
  });

export interface AppOptions {
  apiBase?: string;
  decodePreview?: PreviewDecoder;
}

export class ScreeningApp {
  state: UploadState = initialState();
  private readonly apiBase: string;
  private readonly decodePreview: PreviewDecoder;
  private pending: Promise<void> = Promise.resolve();
  private dragStart: { x: number; y: number } | null = null;

  readonly fileInput: HTMLInputElement;
  readonly previewWrap: HTMLElement;
  readonly previewImage: HTMLImageElement;
  readonly roiBox: HTMLElement;
  readonly roiLabel: HTMLElement;
  readonly clearRoiButton: HTMLButtonElement;
  readonly submitButton: HTMLButtonElement;
  readonly validationMessage: HTMLElement;
  readonly statusMessage: HTMLElement;
  readonly resultSection: HTMLElement;
  readonly resultLabel: HTMLElement;
  readonly resultProbabilities: HTMLElement;
  readonly resultModel: HTMLElement;
  readonly guidance: HTMLElement;
  readonly errorSection: HTMLElement;
  readonly errorMessage: HTMLElement;
  readonly retryButton: HTMLButtonElement;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.apiBase = options.apiBase ?? "";
    this.decodePreview = options.decodePreview ?? defaultPreviewDecoder;
    root.innerHTML = `
      <section class="picker">
        <input type="file" data-role="file" accept="image/*">
        <p data-role="validation" class="validation" hidden></p>
      </section>
      <section class="preview" data-role="preview-wrap" hidden>
        <img data-role="preview" alt="selected lesion photo">
        <div data-role="roi-box" class="roi-box" hidden></div>
        <p data-role="roi-label" class="roi-label">Drag on the photo to mark the lesion (optional).</p>
        <button type="button" data-role="clear-roi" hidden>Clear selection</button>
      </section>
      <section class="actions">
        <button type="button" data-role="submit" disabled>Check lesion</button>
        <p data-role="status" hidden></p>
      </section>
      <section class="result" data-role="result" hidden>
        <h2 data-role="label"></h2>
        <p data-role="probabilities"></p>
        <p data-role="model" class="model-version"></p>
        <p data-role="guidance" class="guidance"></p>
      </section>
      <section class="error" data-role="error" hidden>
        <p data-role="error-message"></p>
        <button type="button" data-role="retry">Retry</button>
      </section>
    `;
    const pick = <T extends HTMLElement>(role: string): T => {
      const el = root.querySelector<T>(`[data-role="${role}"]`);
      if (!el) throw new Error(`missing element ${role}`);
      return el;
    };
    this.fileInput = pick<HTMLInputElement>("file");
    this.validationMessage = pick("validation");
    this.previewWrap = pick("preview-wrap");
    this.previewImage = pick<HTMLImageElement>("preview");
    this.roiBox = pick("roi-box");
    this.roiLabel = pick("roi-label");
    this.clearRoiButton = pick<HTMLButtonElement>("clear-roi");
    this.submitButton = pick<HTMLButtonElement>("submit");
    this.statusMessage = pick("status");
    this.resultSection = pick("result");
    this.resultLabel = pick("label");
    this.resultProbabilities = pick("probabilities");
    this.resultModel = pick("model");
    this.guidance = pick("guidance");
    this.errorSection = pick("error");
    this.errorMessage = pick("error-message");
    this.retryButton = pick<HTMLButtonElement>("retry");

    this.fileInput.addEventListener("change", () => this.track(this.onFileChange()));
    this.submitButton.addEventListener("click", () => this.track(this.onSubmit()));
    this.retryButton.addEventListener("click", () => this.track(this.onSubmit()));
    this.clearRoiButton.addEventListener("click", () => {
      this.state = withRoi(this.state, null);
      this.render();
    });
    this.previewWrap.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.previewWrap.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.previewWrap.addEventListener("pointerup", (e) => this.onPointerUp(e));
    this.render();
  }

  /** Awaitable hook: all async handlers funnel through here. */
  settle(): Promise<void> {
    return this.pending;
  }

  private track(work: Promise<void>): void {
    this.pending = this.pending.then(() => work).catch(() => undefined);
  }

  private async onFileChange(): Promise<void> {
    const file = this.fileInput.files?.[0];
    if (!file) return;
    const verdict = validateFile(file);
    if (!verdict.ok) {
      // invalid files never leave the browser
      this.state = initialState();
      this.render();
      this.validationMessage.textContent = verdict.reason;
      this.validationMessage.hidden = false;
      return;
    }
    const preview = await this.decodePreview(file);
    this.state = withSelectedFile(this.state, file, preview);
    this.render();
  }

  private async onSubmit(): Promise<void> {
    const file = this.state.file;
    if (!canSubmit(this.state) || !file) return;
    this.state = startUpload(this.state);
    this.render();
    try {
      const response = await submitForScreening(this.apiBase, file, this.state.roi);
      this.state = resolveUpload(this.state, response);
    } catch (error) {
      const detail =
        error instanceof ServiceError
          ? error.reason
          : "Could not reach the screening service.";
      this.state = failUpload(this.state, detail);
    }
    this.render();
  }

  private displayPoint(event: PointerEvent): { x: number; y: number } {
    const rect = this.previewImage.getBoundingClientRect();
    return { x: event.clientX - rect.left, y: event.clientY - rect.top };
  }

  private displaySize(): { width: number; height: number } {
    const rect = this.previewImage.getBoundingClientRect();
    // jsdom reports zero layout; fall back to natural size (1:1 mapping)
    return {
      width: rect.width || this.state.preview?.width || 0,
      height: rect.height || this.state.preview?.height || 0,
    };
  }

  private onPointerDown(event: PointerEvent): void {
    if (!this.state.preview || this.state.status === "uploading") return;
    this.dragStart = this.displayPoint(event);
  }

  private onPointerMove(event: PointerEvent): void {
    if (!this.dragStart || !this.state.preview) return;
    const here = this.displayPoint(event);
    const box = normalizeDrag(this.dragStart.x, this.dragStart.y, here.x, here.y);
    this.paintRoiBox(box);
  }

  private onPointerUp(event: PointerEvent): void {
    if (!this.dragStart || !this.state.preview) return;
    const start = this.dragStart;
    this.dragStart = null;
    const here = this.displayPoint(event);
    const { width, height } = this.displaySize();
    const display = clampToBounds(normalizeDrag(start.x, start.y, here.x, here.y), width, height);
    const natural = display
      ? toNaturalCoords(display, width, height, this.state.preview.width, this.state.preview.height)
      : null;
    this.state = withRoi(this.state, natural);
    this.render();
  }

  private paintRoiBox(box: RoiRect): void {
    this.roiBox.hidden = false;
    this.roiBox.style.left = `${box.x}px`;
    this.roiBox.style.top = `${box.y}px`;
    this.roiBox.style.width = `${box.w}px`;
    this.roiBox.style.height = `${box.h}px`;
  }

  render(): void {
    const state = this.state;
    this.validationMessage.hidden = true;
    this.validationMessage.textContent = "";

    this.previewWrap.hidden = state.preview === null;
    if (state.preview) {
      if (this.previewImage.src !== state.preview.dataUrl) {
        this.previewImage.src = state.preview.dataUrl;
      }
      if (state.roi) {
        this.roiLabel.textContent =
          `Region of interest: ${state.roi.w}x${state.roi.h} at (${state.roi.x}, ${state.roi.y}).`;
        this.clearRoiButton.hidden = false;
      } else {
        this.roiLabel.textContent = "Drag on the photo to mark the lesion (optional).";
        this.clearRoiButton.hidden = true;
        this.roiBox.hidden = true;
      }
    }

    this.submitButton.disabled = !canSubmit(state);
    this.statusMessage.hidden = state.status !== "uploading";
    this.statusMessage.textContent = state.status === "uploading" ? "Analyzing photo..." : "";

    if (resultVisible(state)) {
      const r = state.response;
      this.resultSection.hidden = false;
      const percent = Math.round(r.probabilities[r.label] * 100);
      this.resultLabel.textContent = `${r.label} — ${percent}%`;
      this.resultProbabilities.textContent =
        `Monkeypox ${(r.probabilities.Monkeypox * 100).toFixed(1)}% · ` +
        `Others ${(r.probabilities.Others * 100).toFixed(1)}%`;
      this.resultModel.textContent = `Model ${r.model_version}`;
      this.guidance.textContent = r.guidance; // verbatim, never paraphrased
    } else {
      this.resultSection.hidden = true;
    }

    this.errorSection.hidden = state.status !== "error";
    this.errorMessage.textContent = state.errorDetail ?? "";
  }
}

export function mountScreeningApp(root: HTMLElement, options: AppOptions = {}): ScreeningApp {
  return new ScreeningApp(root, options);
}
