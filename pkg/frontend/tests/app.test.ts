import { afterEach, describe, expect, it, vi } from "vitest";

import { ScreeningApp } from "../src/app.js";
import type { Preview, ScreeningResponse } from "../src/types.js";

const RESPONSE: ScreeningResponse = {
  label: "Monkeypox",
  probabilities: { Monkeypox: 0.93, Others: 0.07 },
  model_version: "tiny_test_cnn-fold0-abc",
  guidance: "This automated screening result is NOT a medical diagnosis.",
  latency_ms: 9.5,
};

const PREVIEW: Preview = { dataUrl: "data:image/png;base64,AAAA", width: 320, height: 240 };

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function mountApp(): ScreeningApp {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return new ScreeningApp(root, {
    apiBase: "http://svc",
    decodePreview: async () => PREVIEW,
  });
}

async function selectFile(app: ScreeningApp, file: File): Promise<void> {
  Object.defineProperty(app.fileInput, "files", { value: [file], configurable: true });
  app.fileInput.dispatchEvent(new Event("change"));
  await app.settle();
}

afterEach(() => {
  vi.unstubAllGlobals();
  document.body.innerHTML = "";
});

describe("ScreeningApp", () => {
  it("uploads a valid photo and renders label, percentage, and disclaimer", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(RESPONSE));
    vi.stubGlobal("fetch", fetchMock);
    const app = mountApp();

    await selectFile(app, new File(["png"], "lesion.png", { type: "image/png" }));
    expect(app.submitButton.disabled).toBe(false);
    expect(app.previewWrap.hidden).toBe(false);

    app.submitButton.click();
    await app.settle();

    expect(fetchMock).toHaveBeenCalledOnce();
    expect(app.resultSection.hidden).toBe(false);
    expect(app.resultLabel.textContent).toBe("Monkeypox — 93%");
    expect(app.resultProbabilities.textContent).toContain("Others 7.0%");
    expect(app.guidance.textContent).toBe(RESPONSE.guidance); // verbatim
    expect(app.resultModel.textContent).toContain(RESPONSE.model_version);
    expect(app.errorSection.hidden).toBe(true);
  });

  it("blocks invalid file types client-side with no network call", async () => {
    const fetchMock = vi.fn();
    vi.stubGlobal("fetch", fetchMock);
    const app = mountApp();

    await selectFile(app, new File(["%PDF"], "report.pdf", { type: "application/pdf" }));

    expect(app.validationMessage.hidden).toBe(false);
    expect(app.validationMessage.textContent).toContain("Unsupported file type");
    expect(app.submitButton.disabled).toBe(true);
    expect(fetchMock).not.toHaveBeenCalled();
  });

  it("blocks oversized files client-side", async () => {
    const fetchMock = vi.fn();
    vi.stubGlobal("fetch", fetchMock);
    const app = mountApp();
    const big = new File([new ArrayBuffer(11 * 1024 * 1024)], "big.png", { type: "image/png" });

    await selectFile(app, big);

    expect(app.validationMessage.textContent).toContain("10 MiB");
    expect(fetchMock).not.toHaveBeenCalled();
  });

  it("renders the service error and retries on demand", async () => {
    const fetchMock = vi
      .fn()
      .mockRejectedValueOnce(new TypeError("fetch failed"))
      .mockResolvedValueOnce(jsonResponse(RESPONSE));
    vi.stubGlobal("fetch", fetchMock);
    const app = mountApp();

    await selectFile(app, new File(["png"], "lesion.png", { type: "image/png" }));
    app.submitButton.click();
    await app.settle();

    expect(app.errorSection.hidden).toBe(false);
    expect(app.errorMessage.textContent).toContain("Could not reach");
    expect(app.resultSection.hidden).toBe(true);

    app.retryButton.click();
    await app.settle();

    expect(fetchMock).toHaveBeenCalledTimes(2);
    expect(app.errorSection.hidden).toBe(true);
    expect(app.resultSection.hidden).toBe(false);
  });

  it("shows the server's stated reason for HTTP errors", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => jsonResponse({ error: "image too small after roi crop" }, 400)),
    );
    const app = mountApp();
    await selectFile(app, new File(["png"], "lesion.png", { type: "image/png" }));
    app.submitButton.click();
    await app.settle();
    expect(app.errorMessage.textContent).toContain("image too small");
  });

  it("resubmitting after a result issues a fresh request", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(RESPONSE));
    vi.stubGlobal("fetch", fetchMock);
    const app = mountApp();
    await selectFile(app, new File(["png"], "lesion.png", { type: "image/png" }));

    app.submitButton.click();
    await app.settle();
    app.submitButton.click();
    await app.settle();

    expect(fetchMock).toHaveBeenCalledTimes(2);
  });

  it("marks and clears a region of interest via pointer drag", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => jsonResponse(RESPONSE)));
    const app = mountApp();
    await selectFile(app, new File(["png"], "lesion.png", { type: "image/png" }));

    // jsdom has no layout: display falls back to natural size (1:1)
    app.previewWrap.dispatchEvent(new MouseEvent("pointerdown", { clientX: 10, clientY: 20 }));
    app.previewWrap.dispatchEvent(new MouseEvent("pointerup", { clientX: 110, clientY: 90 }));

    expect(app.state.roi).toEqual({ x: 10, y: 20, w: 100, h: 70 });
    expect(app.roiLabel.textContent).toContain("100x70");

    app.clearRoiButton.click();
    expect(app.state.roi).toBeNull();
  });

  it("submits the roi fields along with the file", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(RESPONSE));
    vi.stubGlobal("fetch", fetchMock);
    const app = mountApp();
    await selectFile(app, new File(["png"], "lesion.png", { type: "image/png" }));
    app.previewWrap.dispatchEvent(new MouseEvent("pointerdown", { clientX: 0, clientY: 0 }));
    app.previewWrap.dispatchEvent(new MouseEvent("pointerup", { clientX: 64, clientY: 64 }));

    app.submitButton.click();
    await app.settle();

    const [, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    const form = init.body as FormData;
    expect(form.get("w")).toBe("64");
    expect(form.get("h")).toBe("64");
  });
});
