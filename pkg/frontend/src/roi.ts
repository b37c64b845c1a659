import type { RoiRect } from "./types.js";

/** Turn a drag between two arbitrary corners into a normalized rectangle. */
export function normalizeDrag(ax: number, ay: number, bx: number, by: number): RoiRect {
  const x = Math.min(ax, bx);
  const y = Math.min(ay, by);
  return { x, y, w: Math.abs(ax - bx), h: Math.abs(ay - by) };
}

/** Clip a rectangle to [0,width)x[0,height); null when nothing remains. */
export function clampToBounds(roi: RoiRect, width: number, height: number): RoiRect | null {
  const x = Math.max(0, Math.min(roi.x, width));
  const y = Math.max(0, Math.min(roi.y, height));
  const w = Math.min(roi.x + roi.w, width) - x;
  const h = Math.min(roi.y + roi.h, height) - y;
  if (w <= 0 || h <= 0) return null;
  return { x, y, w, h };
}

/**
 * Map a selection made on the scaled-down preview into natural image
 * coordinates, rounded to whole pixels and re-clamped to the image.
 */
export function toNaturalCoords(
  roi: RoiRect,
  displayWidth: number,
  displayHeight: number,
  naturalWidth: number,
  naturalHeight: number,
): RoiRect | null {
  if (displayWidth <= 0 || displayHeight <= 0) return null;
  const sx = naturalWidth / displayWidth;
  const sy = naturalHeight / displayHeight;
  const scaled = {
    x: Math.round(roi.x * sx),
    y: Math.round(roi.y * sy),
    w: Math.round(roi.w * sx),
    h: Math.round(roi.h * sy),
  };
  return clampToBounds(scaled, naturalWidth, naturalHeight);
}

export function roiWithinBounds(roi: RoiRect, width: number, height: number): boolean {
  return roi.x >= 0 && roi.y >= 0 && roi.w > 0 && roi.h > 0 && roi.x + roi.w <= width && roi.y + roi.h <= height;
}
