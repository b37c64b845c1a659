"""Seeded synthetic fixtures: raw photo corpora, separable oracle sets, and
random manifests for property tests. Everything here is deterministic in the
seed so pipeline runs are reproducible end to end.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import (
    IMAGE_SIZE,
    ClassLabel,
    DatasetManifest,
    LesionImage,
    ORIGIN_ORIGINAL,
)
from .seeds import rng_from

INTAKE_HEADER = "intake_version=1"
INTAKE_FIELDS = (
    "image_id",
    "path",
    "patient_id",
    "label",
    "roi_x",
    "roi_y",
    "roi_w",
    "roi_h",
    "source_note",
)


def _blob_image(rng: np.random.Generator, height: int, width: int, tint: np.ndarray) -> np.ndarray:
    """Smooth random blobs with a class tint; looks vaguely lesion-like."""
    coarse = rng.random((6, 6, 3))
    img = np.asarray(
        Image.fromarray((coarse * 255).astype(np.uint8), mode="RGB").resize(
            (width, height), Image.BILINEAR
        ),
        dtype=np.float64,
    )
    img = 0.55 * img + 0.45 * tint[None, None, :]
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_raw_corpus(
    root: Path | str,
    seed: int,
    patients_per_class: int = 5,
    max_images_per_patient: int = 3,
) -> Path:
    """Write a raw photo tree plus an intake sheet; returns the sheet path."""
    root = Path(root)
    tints = {
        ClassLabel.MONKEYPOX: np.array([200.0, 90.0, 80.0]),
        ClassLabel.OTHERS: np.array([90.0, 190.0, 90.0]),
    }
    rows = []
    for label in (ClassLabel.MONKEYPOX, ClassLabel.OTHERS):
        prefix = "m" if label is ClassLabel.MONKEYPOX else "o"
        for p in range(patients_per_class):
            patient_id = f"{prefix}{p:03d}"
            rng = rng_from(seed, "corpus", label.value, patient_id)
            n_images = int(rng.integers(1, max_images_per_patient + 1))
            for i in range(n_images):
                height = int(rng.integers(180, 420))
                width = int(rng.integers(180, 420))
                raw = _blob_image(rng, height, width, tints[label])
                rel = f"raw/{patient_id}/{patient_id}_{i}.png"
                target = root / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                Image.fromarray(raw, mode="RGB").save(target, format="PNG")
                roi_w = int(rng.integers(96, width + 1))
                roi_h = int(rng.integers(96, height + 1))
                roi_x = int(rng.integers(0, width - roi_w + 1))
                roi_y = int(rng.integers(0, height - roi_h + 1))
                rows.append(
                    "\t".join(
                        [
                            f"{patient_id}_{i}",
                            rel,
                            patient_id,
                            label.value,
                            str(roi_x),
                            str(roi_y),
                            str(roi_w),
                            str(roi_h),
                            "synthetic corpus",
                        ]
                    )
                )
    sheet = root / "intake.tsv"
    sheet.write_text(INTAKE_HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return sheet


def constant_image(value: tuple[int, int, int]) -> np.ndarray:
    out = np.empty((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    out[:] = np.array(value, dtype=np.uint8)
    return out


def make_redgreen_manifest(
    patients_per_class: int = 6,
    images_per_patient: int = 2,
) -> DatasetManifest:
    """Color-separable oracle set: Monkeypox pure red, Others pure green.

    Pixels are carried in memory; pass entries through a store if files
    are needed.
    """
    entries = []
    for label, color, prefix in (
        (ClassLabel.MONKEYPOX, (255, 0, 0), "red"),
        (ClassLabel.OTHERS, (0, 255, 0), "green"),
    ):
        for p in range(patients_per_class):
            for i in range(images_per_patient):
                entries.append(
                    LesionImage(
                        image_id=f"{prefix}{p:02d}_{i}",
                        patient_id=f"{prefix}{p:02d}",
                        label=label,
                        origin=ORIGIN_ORIGINAL,
                        source_note="oracle",
                        pixels=constant_image(color),
                    )
                )
    return DatasetManifest(entries=entries)


def random_pixel_manifest(seed: int, patients_per_class: int = 4, images_per_patient: int = 2) -> DatasetManifest:
    """Balanced random-pixel images: uninformative by construction."""
    entries = []
    for label, prefix in ((ClassLabel.MONKEYPOX, "rm"), (ClassLabel.OTHERS, "ro")):
        for p in range(patients_per_class):
            for i in range(images_per_patient):
                rng = rng_from(seed, "randpix", prefix, p, i)
                pixels = rng.integers(0, 256, size=(IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
                entries.append(
                    LesionImage(
                        image_id=f"{prefix}{p:02d}_{i}",
                        patient_id=f"{prefix}{p:02d}",
                        label=label,
                        origin=ORIGIN_ORIGINAL,
                        source_note="random",
                        pixels=pixels,
                    )
                )
    return DatasetManifest(entries=entries)


def metadata_manifest(class_patient_counts: dict[ClassLabel, list[int]]) -> DatasetManifest:
    """Metadata-only manifest from per-class lists of per-patient image counts."""
    entries = []
    for label, counts in class_patient_counts.items():
        prefix = "MP" if label is ClassLabel.MONKEYPOX else "OT"
        for p, n_images in enumerate(counts):
            for i in range(n_images):
                entries.append(
                    LesionImage(
                        image_id=f"{prefix}{p:03d}_{i}",
                        patient_id=f"{prefix}{p:03d}",
                        label=label,
                        origin=ORIGIN_ORIGINAL,
                    )
                )
    return DatasetManifest(entries=entries)


def published_distribution_counts(seed: int = 0) -> dict[ClassLabel, list[int]]:
    """Per-patient image counts matching the published dataset distribution:
    102 images over 55 patients and 126 over 107."""
    out: dict[ClassLabel, list[int]] = {}
    for label, n_images, n_patients in (
        (ClassLabel.MONKEYPOX, 102, 55),
        (ClassLabel.OTHERS, 126, 107),
    ):
        rng = rng_from(seed, "published-shape", label.value)
        counts = [1] * n_patients
        for _ in range(n_images - n_patients):
            counts[int(rng.integers(0, n_patients))] += 1
        out[label] = counts
    return out
