export type ClassLabel = "Monkeypox" | "Others";

/** Success body of POST /api/v1/predict; field names are fixed by the API. */
export interface ScreeningResponse {
  label: ClassLabel;
  probabilities: Record<ClassLabel, number>;
  model_version: string;
  guidance: string;
  latency_ms: number;
}

/** Rectangle in image pixel coordinates (x right, y down). */
export interface RoiRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Preview {
  dataUrl: string;
  width: number;
  height: number;
}
