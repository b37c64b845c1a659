"""Data model for the lesion dataset: records, manifest, payload store, counts.

A manifest is a flat, line-delimited catalog of images. Pixel payloads live
as lossless PNG files in a ``class/patient_id/image_id.png`` tree; the
manifest only stores relative paths.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SIZE = 224
SCHEMA_VERSION = 1

ORIGIN_ORIGINAL = "original"
ORIGIN_AUGMENTED = "augmented"

MANIFEST_FIELDS = (
    "image_id",
    "patient_id",
    "label",
    "origin",
    "parent_id",
    "transform_name",
    "relative_path",
    "source_note",
)


class ClassLabel(enum.Enum):
    """Binary class label. Serialized names are load-bearing."""

    MONKEYPOX = "Monkeypox"
    OTHERS = "Others"

    def __str__(self) -> str:
        return self.value


class ManifestError(ValueError):
    """A manifest invariant does not hold."""


def check_pixels(pixels: np.ndarray, *, image_id: str = "?") -> np.ndarray:
    """Assert the fixed pixel contract: uint8, 224x224x3."""
    arr = np.asarray(pixels)
    if arr.shape != (IMAGE_SIZE, IMAGE_SIZE, 3):
        raise ValueError(
            f"image {image_id}: pixels must be {IMAGE_SIZE}x{IMAGE_SIZE}x3, got {arr.shape}"
        )
    if arr.dtype != np.uint8:
        raise ValueError(f"image {image_id}: pixels must be uint8, got {arr.dtype}")
    return arr


@dataclass
class LesionImage:
    """One curated 224x224 RGB image plus provenance.

    ``pixels`` is the optional in-memory payload; persisted copies live in an
    :class:`ImageStore` and are referenced through ``relative_path``.
    """

    image_id: str
    patient_id: str
    label: ClassLabel
    origin: str = ORIGIN_ORIGINAL
    parent_id: str | None = None
    transform_name: str | None = None
    relative_path: str | None = None
    source_note: str = ""
    pixels: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.origin not in (ORIGIN_ORIGINAL, ORIGIN_AUGMENTED):
            raise ValueError(f"image {self.image_id}: unknown origin {self.origin!r}")
        if self.origin == ORIGIN_AUGMENTED:
            if not self.parent_id or not self.transform_name:
                raise ValueError(
                    f"image {self.image_id}: augmented entries need parent_id and transform_name"
                )
        else:
            if self.parent_id is not None or self.transform_name is not None:
                raise ValueError(
                    f"image {self.image_id}: original entries must not carry parent_id/transform_name"
                )
        if self.pixels is not None:
            self.pixels = check_pixels(self.pixels, image_id=self.image_id)

    def with_pixels(self, pixels: np.ndarray) -> "LesionImage":
        return replace(self, pixels=check_pixels(pixels, image_id=self.image_id))


@dataclass
class ClassCounts:
    """Tabulated class counts. ``augmented_images`` is the size of the
    expanded set (originals plus their variants), or 0 when the class has
    no augmented entries; the published distribution counts it this way
    (102 originals expand to 1428, i.e. 14x)."""

    original_images: int = 0
    unique_patients: int = 0
    augmented_images: int = 0


@dataclass
class CountsSummary:
    """Per-class and total image/patient counts of a manifest."""

    per_class: dict[ClassLabel, ClassCounts]
    total: ClassCounts

    @property
    def rows(self) -> list[tuple[str, ClassCounts]]:
        ordered = [ClassLabel.MONKEYPOX, ClassLabel.OTHERS]
        out = [(label.value, self.per_class[label]) for label in ordered if label in self.per_class]
        out.append(("Total", self.total))
        return out


def _sanitize_note(note: str) -> str:
    # Field/record separators are reserved by the manifest format.
    return note.replace("\t", " ").replace("\n", " ").replace("\r", " ")


@dataclass
class DatasetManifest:
    """Ordered catalog of lesion images; invariants enforced by validate()."""

    entries: list[LesionImage] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __len__(self) -> int:
        return len(self.entries)

    def by_id(self) -> dict[str, LesionImage]:
        return {e.image_id: e for e in self.entries}

    def originals(self) -> list[LesionImage]:
        return [e for e in self.entries if e.origin == ORIGIN_ORIGINAL]

    def augmented(self) -> list[LesionImage]:
        return [e for e in self.entries if e.origin == ORIGIN_AUGMENTED]

    def children_of(self) -> dict[str, list[LesionImage]]:
        out: dict[str, list[LesionImage]] = {}
        for e in self.entries:
            if e.origin == ORIGIN_AUGMENTED:
                out.setdefault(e.parent_id, []).append(e)
        return out

    def patient_labels(self) -> dict[str, ClassLabel]:
        """patient_id -> label; raises if a patient spans two classes."""
        seen: dict[str, ClassLabel] = {}
        for e in self.entries:
            prior = seen.get(e.patient_id)
            if prior is not None and prior != e.label:
                raise ManifestError(
                    f"patient {e.patient_id} appears under both {prior.value} and {e.label.value}"
                )
            seen[e.patient_id] = e.label
        return seen

    def validate(self) -> None:
        seen_ids: set[str] = set()
        for e in self.entries:
            if e.image_id in seen_ids:
                raise ManifestError(f"duplicate image_id {e.image_id}")
            seen_ids.add(e.image_id)
        self.patient_labels()
        ids = {e.image_id: e for e in self.entries}
        for e in self.entries:
            if e.origin == ORIGIN_AUGMENTED:
                parent = ids.get(e.parent_id)
                if parent is None:
                    raise ManifestError(f"image {e.image_id}: parent {e.parent_id} not in manifest")
                if parent.origin != ORIGIN_ORIGINAL:
                    raise ManifestError(
                        f"image {e.image_id}: parent {e.parent_id} is not an original"
                    )

    def write(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"schema_version={self.schema_version}"]
        for e in self.entries:
            lines.append(
                "\t".join(
                    [
                        e.image_id,
                        e.patient_id,
                        e.label.value,
                        e.origin,
                        e.parent_id or "",
                        e.transform_name or "",
                        e.relative_path or "",
                        _sanitize_note(e.source_note),
                    ]
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: Path | str) -> "DatasetManifest":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("schema_version="):
            raise ManifestError(f"{path}: missing schema_version header")
        version = int(lines[0].split("=", 1)[1])
        entries = []
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != len(MANIFEST_FIELDS):
                raise ManifestError(f"{path}:{n}: expected {len(MANIFEST_FIELDS)} fields, got {len(parts)}")
            image_id, patient_id, label, origin, parent_id, transform_name, rel, note = parts
            entries.append(
                LesionImage(
                    image_id=image_id,
                    patient_id=patient_id,
                    label=ClassLabel(label),
                    origin=origin,
                    parent_id=parent_id or None,
                    transform_name=transform_name or None,
                    relative_path=rel or None,
                    source_note=note,
                )
            )
        return cls(entries=entries, schema_version=version)


class ImageStore:
    """Payload store: lossless PNGs under ``root/class/patient_id/image_id.png``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def relative_path_for(self, entry: LesionImage) -> str:
        return f"{entry.label.value}/{entry.patient_id}/{entry.image_id}.png"

    def save(self, entry: LesionImage) -> LesionImage:
        """Persist entry.pixels; returns the entry with relative_path set."""
        pixels = check_pixels(entry.pixels, image_id=entry.image_id)
        rel = self.relative_path_for(entry)
        target = self.root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(pixels, mode="RGB").save(target, format="PNG")
        return replace(entry, relative_path=rel)

    def load(self, entry: LesionImage) -> np.ndarray:
        if entry.pixels is not None:
            return entry.pixels
        if not entry.relative_path:
            raise FileNotFoundError(f"image {entry.image_id}: no pixels and no relative_path")
        with Image.open(self.root / entry.relative_path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        return check_pixels(arr, image_id=entry.image_id)


class ArrayStore:
    """In-memory store with the ImageStore interface; used by tests."""

    def __init__(self) -> None:
        self._data: dict[str, np.ndarray] = {}

    def save(self, entry: LesionImage) -> LesionImage:
        self._data[entry.image_id] = check_pixels(entry.pixels, image_id=entry.image_id)
        return replace(entry, relative_path=f"mem/{entry.image_id}")

    def load(self, entry: LesionImage) -> np.ndarray:
        if entry.pixels is not None:
            return entry.pixels
        if entry.image_id not in self._data:
            raise FileNotFoundError(f"image {entry.image_id}: not in store")
        return self._data[entry.image_id]


def summarize(manifest: DatasetManifest) -> CountsSummary:
    """Tabulate originals, unique patients, and augmented images per class."""
    manifest.validate()
    per_class: dict[ClassLabel, ClassCounts] = {
        ClassLabel.MONKEYPOX: ClassCounts(),
        ClassLabel.OTHERS: ClassCounts(),
    }
    patients: dict[ClassLabel, set[str]] = {label: set() for label in per_class}
    children: dict[ClassLabel, int] = {label: 0 for label in per_class}
    for e in manifest.entries:
        if e.origin == ORIGIN_ORIGINAL:
            per_class[e.label].original_images += 1
        else:
            children[e.label] += 1
        patients[e.label].add(e.patient_id)
    for label, counts in per_class.items():
        counts.unique_patients = len(patients[label])
        if children[label]:
            counts.augmented_images = counts.original_images + children[label]
    total = ClassCounts(
        original_images=sum(c.original_images for c in per_class.values()),
        unique_patients=sum(c.unique_patients for c in per_class.values()),
        augmented_images=sum(c.augmented_images for c in per_class.values()),
    )
    return CountsSummary(per_class=per_class, total=total)
