"""The 13-transform augmentation catalog and the 14x dataset expansion.

Every transform draws its randomness from a generator seeded only with a
derived seed, so (master_seed, image_id, kind) fully determines the output
pixels. Geometric transforms fill exposed regions by edge replication;
photometric transforms round and clamp back to [0, 255].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.ndimage as ndi

from .dataset import (
    IMAGE_SIZE,
    DatasetManifest,
    LesionImage,
    ORIGIN_AUGMENTED,
    ORIGIN_ORIGINAL,
    check_pixels,
)
from .seeds import derive_seed


class TransformKind(enum.Enum):
    """One member per item of the augmentation catalog, in catalog order."""

    ROT90_MULTIPLE = "rot90_multiple"
    ROT_FREE = "rot_free"
    TRANSLATION = "translation"
    REFLECTION = "reflection"
    SHEAR = "shear"
    HUE_JITTER = "hue_jitter"
    SATURATION_JITTER = "saturation_jitter"
    BRIGHTNESS_JITTER = "brightness_jitter"
    CONTRAST_JITTER = "contrast_jitter"
    SALT_PEPPER_NOISE = "salt_pepper_noise"
    GAUSSIAN_NOISE = "gaussian_noise"
    SYNTHETIC_BLUR = "synthetic_blur"
    SCALING = "scaling"


EXPANSION_FACTOR = 1 + len(TransformKind)  # originals plus one child per kind


@dataclass(frozen=True)
class AugmentationSpec:
    """Parameter ranges for the transform catalog plus the master seed."""

    master_seed: int
    rot_free_degrees: tuple[float, float] = (-45.0, 45.0)
    translation_fraction: tuple[float, float] = (-0.10, 0.10)
    reflection_axis: str = "horizontal"
    shear_degrees: tuple[float, float] = (-15.0, 15.0)
    hue_shift_fraction: tuple[float, float] = (-0.05, 0.05)
    saturation_scale: tuple[float, float] = (0.7, 1.3)
    brightness_scale: tuple[float, float] = (0.7, 1.3)
    contrast_scale: tuple[float, float] = (0.7, 1.3)
    salt_pepper_density: float = 0.02
    gaussian_noise_sigma: float = 10.0
    blur_sigma: tuple[float, float] = (1.0, 2.0)
    scale_factor: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self) -> None:
        for name in (
            "rot_free_degrees",
            "translation_fraction",
            "shear_degrees",
            "hue_shift_fraction",
            "saturation_scale",
            "brightness_scale",
            "contrast_scale",
            "blur_sigma",
            "scale_factor",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
        if not 0.0 <= self.salt_pepper_density <= 1.0:
            raise ValueError("salt_pepper_density must be in [0, 1]")
        if self.gaussian_noise_sigma < 0:
            raise ValueError("gaussian_noise_sigma must be >= 0")
        if self.reflection_axis != "horizontal":
            raise ValueError("only horizontal reflection is supported")

    def to_file(self, path) -> None:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                lines.append(f"{f.name}={value[0]},{value[1]}")
            else:
                lines.append(f"{f.name}={value}")
        from pathlib import Path

        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "AugmentationSpec":
        from pathlib import Path

        raw: dict[str, str] = {}
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()
        if "master_seed" not in raw:
            raise ValueError(f"{path}: master_seed is mandatory")
        kwargs: dict = {}
        for f in fields(cls):
            if f.name not in raw:
                continue
            text = raw.pop(f.name)
            if f.name == "master_seed":
                kwargs[f.name] = int(text)
            elif f.name == "reflection_axis":
                kwargs[f.name] = text
            elif "," in text:
                lo, hi = text.split(",", 1)
                kwargs[f.name] = (float(lo), float(hi))
            else:
                kwargs[f.name] = float(text)
        if raw:
            raise ValueError(f"{path}: unknown keys {sorted(raw)}")
        return cls(**kwargs)


def sample_params(kind: TransformKind, spec: AugmentationSpec, rng: np.random.Generator) -> dict:
    """Draw the parameters one transform application needs."""
    if kind is TransformKind.ROT90_MULTIPLE:
        # k=0 would duplicate the parent, so only proper rotations are drawn.
        return {"k": int(rng.integers(1, 4))}
    if kind is TransformKind.ROT_FREE:
        return {"degrees": float(rng.uniform(*spec.rot_free_degrees))}
    if kind is TransformKind.TRANSLATION:
        return {
            "dx": float(rng.uniform(*spec.translation_fraction)) * IMAGE_SIZE,
            "dy": float(rng.uniform(*spec.translation_fraction)) * IMAGE_SIZE,
        }
    if kind is TransformKind.REFLECTION:
        return {"axis": spec.reflection_axis}
    if kind is TransformKind.SHEAR:
        return {"degrees": float(rng.uniform(*spec.shear_degrees))}
    if kind is TransformKind.HUE_JITTER:
        return {"shift": float(rng.uniform(*spec.hue_shift_fraction))}
    if kind is TransformKind.SATURATION_JITTER:
        return {"scale": float(rng.uniform(*spec.saturation_scale))}
    if kind is TransformKind.BRIGHTNESS_JITTER:
        return {"scale": float(rng.uniform(*spec.brightness_scale))}
    if kind is TransformKind.CONTRAST_JITTER:
        return {"scale": float(rng.uniform(*spec.contrast_scale))}
    if kind is TransformKind.SALT_PEPPER_NOISE:
        return {"density": spec.salt_pepper_density, "noise_seed": int(rng.integers(0, 2**63))}
    if kind is TransformKind.GAUSSIAN_NOISE:
        return {"sigma": spec.gaussian_noise_sigma, "noise_seed": int(rng.integers(0, 2**63))}
    if kind is TransformKind.SYNTHETIC_BLUR:
        return {"sigma": float(rng.uniform(*spec.blur_sigma))}
    if kind is TransformKind.SCALING:
        return {"factor": float(rng.uniform(*spec.scale_factor))}
    raise ValueError(f"unknown transform kind: {kind!r}")


def _to_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def _affine(pixels: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Apply an output->input 2x2 coordinate map about the image center."""
    center = (np.array(pixels.shape[:2], dtype=np.float32) - 1.0) / 2.0
    matrix = matrix.astype(np.float32)
    offset = center - matrix @ center
    out = np.empty(pixels.shape, dtype=np.float32)
    for ch in range(pixels.shape[2]):
        out[..., ch] = ndi.affine_transform(
            pixels[..., ch].astype(np.float32), matrix, offset=offset, order=1, mode="nearest"
        )
    return _to_u8(out)


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    v = maxc
    c = maxc - minc
    s = np.where(maxc > 0, c / np.where(maxc > 0, maxc, 1.0), 0.0)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    h = np.zeros_like(maxc)
    safe_c = np.where(c > 0, c, 1.0)
    rmax = (maxc == r) & (c > 0)
    gmax = (maxc == g) & (c > 0) & ~rmax
    bmax = (c > 0) & ~rmax & ~gmax
    h = np.where(rmax, ((g - b) / safe_c) % 6.0, h)
    h = np.where(gmax, (b - r) / safe_c + 2.0, h)
    h = np.where(bmax, (r - g) / safe_c + 4.0, h)
    return np.stack([h / 6.0 % 1.0, s, v], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    sector = (i.astype(np.int64) % 6)[None, ..., None]
    # channel layout per sector, gathered in one pass
    choices = np.stack(
        [
            np.stack([v, t, p], axis=-1),
            np.stack([q, v, p], axis=-1),
            np.stack([p, v, t], axis=-1),
            np.stack([p, q, v], axis=-1),
            np.stack([t, p, v], axis=-1),
            np.stack([v, p, q], axis=-1),
        ]
    )
    return np.take_along_axis(choices, np.broadcast_to(sector, (1, *hsv.shape)), axis=0)[0]


def apply_params(pixels: np.ndarray, kind: TransformKind, params: dict) -> np.ndarray:
    """Deterministically apply one transform given its sampled parameters."""
    pixels = check_pixels(pixels)
    if kind is TransformKind.ROT90_MULTIPLE:
        return np.ascontiguousarray(np.rot90(pixels, k=params["k"]))
    if kind is TransformKind.ROT_FREE:
        theta = np.deg2rad(params["degrees"])
        matrix = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        return _affine(pixels, matrix)
    if kind is TransformKind.TRANSLATION:
        shifted = np.empty(pixels.shape, dtype=np.float32)
        for ch in range(3):
            shifted[..., ch] = ndi.shift(
                pixels[..., ch].astype(np.float32),
                (params["dy"], params["dx"]),
                order=1,
                mode="nearest",
            )
        return _to_u8(shifted)
    if kind is TransformKind.REFLECTION:
        return np.ascontiguousarray(pixels[:, ::-1, :])
    if kind is TransformKind.SHEAR:
        t = np.tan(np.deg2rad(params["degrees"]))
        matrix = np.array([[1.0, 0.0], [t, 1.0]])
        return _affine(pixels, matrix)
    if kind is TransformKind.HUE_JITTER:
        hsv = _rgb_to_hsv(pixels.astype(np.float32) / np.float32(255.0))
        hsv[..., 0] = (hsv[..., 0] + np.float32(params["shift"])) % 1.0
        return _to_u8(_hsv_to_rgb(hsv) * 255.0)
    if kind is TransformKind.SATURATION_JITTER:
        hsv = _rgb_to_hsv(pixels.astype(np.float32) / np.float32(255.0))
        hsv[..., 1] = np.clip(hsv[..., 1] * np.float32(params["scale"]), 0.0, 1.0)
        return _to_u8(_hsv_to_rgb(hsv) * 255.0)
    if kind is TransformKind.BRIGHTNESS_JITTER:
        return _to_u8(pixels.astype(np.float64) * params["scale"])
    if kind is TransformKind.CONTRAST_JITTER:
        gray_mean = float((pixels.astype(np.float64) @ np.array([0.299, 0.587, 0.114])).mean())
        return _to_u8((pixels.astype(np.float64) - gray_mean) * params["scale"] + gray_mean)
    if kind is TransformKind.SALT_PEPPER_NOISE:
        rng = np.random.Generator(np.random.PCG64(params["noise_seed"]))
        corrupt = rng.random(pixels.shape[:2]) < params["density"]
        salt = rng.random(pixels.shape[:2]) < 0.5
        out = pixels.copy()
        out[corrupt & salt] = 255
        out[corrupt & ~salt] = 0
        return out
    if kind is TransformKind.GAUSSIAN_NOISE:
        rng = np.random.Generator(np.random.PCG64(params["noise_seed"]))
        noise = rng.normal(0.0, params["sigma"], size=pixels.shape) if params["sigma"] > 0 else 0.0
        return _to_u8(pixels.astype(np.float64) + noise)
    if kind is TransformKind.SYNTHETIC_BLUR:
        blurred = ndi.gaussian_filter(
            pixels.astype(np.float32), sigma=(params["sigma"], params["sigma"], 0.0), mode="nearest"
        )
        return _to_u8(blurred)
    if kind is TransformKind.SCALING:
        f = params["factor"]
        matrix = np.array([[1.0 / f, 0.0], [0.0, 1.0 / f]])
        return _affine(pixels, matrix)
    raise ValueError(f"unknown transform kind: {kind!r}")


def _format_params(params: dict) -> str:
    return " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(params.items()))


def child_id(parent_id: str, kind: TransformKind) -> str:
    return f"{parent_id}__{kind.value}"


def apply_transform(
    image: LesionImage, kind: TransformKind, spec: AugmentationSpec, derived_seed: int
) -> LesionImage:
    """Produce the augmented child of an original image for one kind."""
    if not isinstance(kind, TransformKind):
        raise ValueError(f"unknown transform kind: {kind!r}")
    if image.origin != ORIGIN_ORIGINAL:
        raise ValueError(f"image {image.image_id}: refusing to augment an augmented image")
    if image.pixels is None:
        raise ValueError(f"image {image.image_id}: pixels not loaded")
    rng = np.random.Generator(np.random.PCG64(derived_seed))
    params = sample_params(kind, spec, rng)
    out = apply_params(image.pixels, kind, params)
    return LesionImage(
        image_id=child_id(image.image_id, kind),
        patient_id=image.patient_id,
        label=image.label,
        origin=ORIGIN_AUGMENTED,
        parent_id=image.image_id,
        transform_name=kind.value,
        source_note=f"{kind.value}({_format_params(params)})",
        pixels=out,
    )


def expand_dataset(
    manifest: DatasetManifest, spec: AugmentationSpec, store=None
) -> DatasetManifest:
    """Append exactly one augmented child per (original, kind) pair.

    With a store, parents are loaded and children persisted as they are made
    (payloads are not kept in memory); without one, children carry pixels.
    """
    manifest.validate()
    already = [e.image_id for e in manifest.entries if e.origin == ORIGIN_AUGMENTED]
    if already:
        raise ValueError(
            f"manifest already contains {len(already)} augmented entries (first: {already[0]}); "
            "refusing to expand twice"
        )
    out_entries = list(manifest.entries)
    for parent in sorted(manifest.entries, key=lambda e: e.image_id):
        if parent.pixels is not None:
            pixels = parent.pixels
        elif store is not None:
            pixels = store.load(parent)
        else:
            raise ValueError(f"image {parent.image_id}: pixels not loaded and no store given")
        loaded = replace(parent, pixels=pixels)
        for kind in TransformKind:
            seed = derive_seed(spec.master_seed, parent.image_id, kind.value)
            aug = apply_transform(loaded, kind, spec, seed)
            if store is not None:
                aug = replace(store.save(aug), pixels=None)
            out_entries.append(aug)
    expanded = DatasetManifest(entries=out_entries, schema_version=manifest.schema_version)
    expanded.validate()
    return expanded
