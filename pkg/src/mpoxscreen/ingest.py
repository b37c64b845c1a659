"""Image intake: ROI crop, pad-to-square by edge replication, resize to 224.

Padding instead of anisotropic resizing keeps lesion geometry undistorted;
edge replication avoids black borders that noise augmentation would treat
as signal.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .dataset import IMAGE_SIZE, ClassLabel, LesionImage, ORIGIN_ORIGINAL


@dataclass(frozen=True)
class Rect:
    """Rectangle in source pixel coordinates (x right, y down)."""

    x: int
    y: int
    w: int
    h: int


def decode_image(payload: bytes) -> np.ndarray:
    """Decode common photo formats to an RGB uint8 array."""
    try:
        with Image.open(io.BytesIO(payload)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValueError(f"undecodable image payload: {exc}") from exc


def crop_roi(raw: np.ndarray, roi: Rect) -> np.ndarray:
    h, w = raw.shape[:2]
    if roi.w <= 0 or roi.h <= 0:
        raise ValueError(f"roi has zero area: {roi}")
    if roi.x < 0 or roi.y < 0 or roi.x + roi.w > w or roi.y + roi.h > h:
        raise ValueError(f"roi {roi} out of bounds for {w}x{h} image")
    return raw[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w]


def pad_to_square(arr: np.ndarray) -> tuple[np.ndarray, dict[str, int]]:
    """Edge-replicate the shorter side symmetrically (odd leftover goes last)."""
    h, w = arr.shape[:2]
    pads = {"top": 0, "bottom": 0, "left": 0, "right": 0}
    if h < w:
        diff = w - h
        pads["top"], pads["bottom"] = diff // 2, diff - diff // 2
    elif w < h:
        diff = h - w
        pads["left"], pads["right"] = diff // 2, diff - diff // 2
    if any(pads.values()):
        arr = np.pad(
            arr,
            ((pads["top"], pads["bottom"]), (pads["left"], pads["right"]), (0, 0)),
            mode="edge",
        )
    return arr, pads


def resize_bilinear(arr: np.ndarray, size: int = IMAGE_SIZE) -> np.ndarray:
    if arr.shape[0] == size and arr.shape[1] == size:
        return arr.astype(np.uint8, copy=False)
    im = Image.fromarray(arr, mode="RGB")
    return np.asarray(im.resize((size, size), Image.BILINEAR), dtype=np.uint8)


def standardize(raw: np.ndarray, roi: Rect | None = None) -> tuple[np.ndarray, dict[str, int]]:
    """Crop (optional), square-pad, and resize a raw RGB array to 224x224."""
    raw = np.asarray(raw)
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValueError(f"expected HxWx3 RGB array, got shape {raw.shape}")
    crop = crop_roi(raw, roi) if roi is not None else crop_roi(raw, Rect(0, 0, raw.shape[1], raw.shape[0]))
    square, pads = pad_to_square(crop)
    return resize_bilinear(square), pads


def ingest_image(
    raw: np.ndarray,
    roi: Rect,
    *,
    image_id: str,
    patient_id: str,
    label: ClassLabel,
    source_note: str = "",
) -> LesionImage:
    """Produce a curated original entry from a raw photo and its ROI."""
    pixels, pads = standardize(raw, roi)
    pad_note = f"pad_t={pads['top']} pad_b={pads['bottom']} pad_l={pads['left']} pad_r={pads['right']}"
    note = f"{source_note}; {pad_note}" if source_note else pad_note
    return LesionImage(
        image_id=image_id,
        patient_id=patient_id,
        label=label,
        origin=ORIGIN_ORIGINAL,
        source_note=note,
        pixels=pixels,
    )
