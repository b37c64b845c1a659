"""HTTP screening service: upload a lesion photo, get label + guidance.

Privacy default: uploads are processed in memory and discarded. With the
retention opt-in, only an anonymized record (timestamp, label,
probabilities) is appended; image bytes are never persisted.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse

from .dataset import ClassLabel
from .inference import label_from_probabilities, predict_pixels
from .ingest import Rect, crop_roi, decode_image, pad_to_square, resize_bilinear
from .networks import LesionClassifier
from .training import instantiate, load_trained

MAX_PAYLOAD_BYTES = 10 * 2**20
MIN_ROI_DIMENSION = 64

GUIDANCE_TEXT = (
    "This automated screening result is NOT a medical diagnosis. "
    "If the assessment indicates a possible monkeypox lesion, or if you feel "
    "unwell, isolate from close contact and consult a physician urgently. "
    "A negative assessment does not rule out infection."
)


class ModelRegistry:
    """Directory of persisted trained models, one subdirectory per version."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def entries(self) -> list[dict]:
        out = []
        if not self.root.is_dir():
            raise OSError(f"model registry not readable: {self.root}")
        for sub in sorted(self.root.iterdir()):
            meta_path = sub / "meta.json"
            if not meta_path.is_file():
                continue
            meta = json.loads(meta_path.read_text())
            out.append(
                {
                    "version": meta["version_tag"],
                    "backbone_id": meta.get("backbone_id", ""),
                    "created": meta.get("created", ""),
                    "mean_accuracy": meta.get("mean_accuracy"),
                    "path": str(sub),
                }
            )
        return out

    def default_version(self) -> str | None:
        entries = self.entries()
        if not entries:
            return None
        # Operator preference: highest recorded mean accuracy, then newest.
        entries.sort(
            key=lambda e: (
                e["mean_accuracy"] is not None,
                e["mean_accuracy"] if e["mean_accuracy"] is not None else 0.0,
                e["created"],
                e["version"],
            ),
            reverse=True,
        )
        return entries[0]["version"]

    def load(self, version: str) -> LesionClassifier:
        for entry in self.entries():
            if entry["version"] == version:
                return instantiate(load_trained(entry["path"]))
        raise KeyError(f"model version not found: {version}")


class RetentionStore:
    """Write side of the service, instrumentable in tests.

    ``image_writes`` exists to make the privacy contract observable: nothing
    in the service increments it.
    """

    def __init__(self, path: Path | str | None):
        self.path = Path(path) if path else None
        self.record_writes = 0
        self.image_writes = 0

    def save_record(self, record: dict) -> None:
        self.record_writes += 1
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(
    registry_dir: Path | str,
    *,
    retain: bool = False,
    max_payload_bytes: int = MAX_PAYLOAD_BYTES,
    retention_path: Path | str | None = None,
) -> FastAPI:
    app = FastAPI(title="mpoxscreen", docs_url=None, redoc_url=None)
    registry = ModelRegistry(registry_dir)
    app.state.registry = registry
    app.state.retain = retain
    app.state.retention = RetentionStore(retention_path if retain else None)
    app.state.max_payload_bytes = max_payload_bytes
    app.state.started = time.monotonic()
    app.state.active = None  # (version, model) swapped atomically

    default = registry.default_version() if registry.root.is_dir() else None
    if default is not None:
        app.state.active = (default, registry.load(default))

    @app.get("/api/v1/health")
    def health():
        active = app.state.active
        return {
            "status": "ok" if active else "degraded",
            "model_version": active[0] if active else None,
            "uptime_seconds": time.monotonic() - app.state.started,
        }

    @app.get("/api/v1/models")
    def models():
        try:
            entries = registry.entries()
        except OSError as exc:
            return _error(500, str(exc))
        active = app.state.active
        active_version = active[0] if active else None
        return {
            "models": [
                {
                    "version": e["version"],
                    "backbone_id": e["backbone_id"],
                    "created": e["created"],
                    "mean_accuracy": e["mean_accuracy"],
                    "active": e["version"] == active_version,
                }
                for e in entries
            ]
        }

    @app.post("/api/v1/models/{version}/activate")
    def activate(version: str):
        try:
            model = registry.load(version)
        except KeyError as exc:
            return _error(404, str(exc))
        app.state.active = (version, model)
        return {"active": version}

    @app.post("/api/v1/predict")
    async def predict_endpoint(request: Request, file: UploadFile):
        started = time.perf_counter()
        active = app.state.active  # requests finish on the model they started with
        if active is None:
            return _error(503, "no model loaded")
        version, model = active

        payload = await file.read()
        if len(payload) > app.state.max_payload_bytes:
            return _error(413, f"payload exceeds {app.state.max_payload_bytes} bytes")
        try:
            raw = decode_image(payload)
        except ValueError:
            return _error(415, "payload is not a decodable image")

        form = await request.form()
        roi_fields = [form.get(k) for k in ("x", "y", "w", "h")]
        roi = None
        if any(v is not None for v in roi_fields):
            if any(v is None for v in roi_fields):
                return _error(400, "roi requires all of x, y, w, h")
            try:
                roi = Rect(*(int(v) for v in roi_fields))
            except ValueError:
                return _error(400, "roi fields must be integers")
        try:
            crop = crop_roi(raw, roi) if roi else raw
        except ValueError as exc:
            return _error(400, str(exc))
        if min(crop.shape[:2]) < MIN_ROI_DIMENSION:
            return _error(
                400,
                f"image too small after roi crop: {crop.shape[1]}x{crop.shape[0]} "
                f"(minimum dimension {MIN_ROI_DIMENSION})",
            )

        square, _ = pad_to_square(crop)
        pixels = resize_bilinear(square)
        probs = predict_pixels(model, pixels)
        label = label_from_probabilities(probs)
        latency_ms = (time.perf_counter() - started) * 1000.0

        if app.state.retain:
            app.state.retention.save_record(
                {
                    "timestamp": time.time(),
                    "label": label.value,
                    "probabilities": {
                        ClassLabel.MONKEYPOX.value: float(probs[0]),
                        ClassLabel.OTHERS.value: float(probs[1]),
                    },
                }
            )

        return {
            "label": label.value,
            "probabilities": {
                ClassLabel.MONKEYPOX.value: float(probs[0]),
                ClassLabel.OTHERS.value: float(probs[1]),
            },
            "model_version": version,
            "guidance": GUIDANCE_TEXT,
            "latency_ms": latency_ms,
        }

    return app
