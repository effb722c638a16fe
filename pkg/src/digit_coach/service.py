"""HTTP inference endpoint exposing a trained coach + classifier pair.

POST /propose takes {"pixels": [784 floats in 0..1], "label": 0..9} and
returns the proposal with confidence/ink/change metrics for both sides.
GET /health reports readiness and the loaded checkpoint identities.
Validation failures return 400 with the offending field named; requests
before models are loaded return 503.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .models import ClassifierModel, CoachModel
from .persistence import load_checkpoint, read_header

PIXEL_COUNT = 784


class ValidationFailure(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


def validate_request(payload) -> tuple[np.ndarray, int]:
    """Check a /propose payload; returns (pixels float32 (784,), label)."""
    if not isinstance(payload, dict):
        raise ValidationFailure("body", "request body must be a JSON object")
    if "pixels" not in payload:
        raise ValidationFailure("pixels", "missing field 'pixels'")
    if "label" not in payload:
        raise ValidationFailure("label", "missing field 'label'")
    pixels = payload["pixels"]
    if not isinstance(pixels, (list, tuple)):
        raise ValidationFailure("pixels", "'pixels' must be an array of numbers")
    if len(pixels) != PIXEL_COUNT:
        raise ValidationFailure(
            "pixels", f"'pixels' must have exactly {PIXEL_COUNT} values, got {len(pixels)}")
    try:
        arr = np.asarray(pixels, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationFailure("pixels", "'pixels' must contain only numbers") from None
    if not np.all(np.isfinite(arr)):
        raise ValidationFailure("pixels", "'pixels' values must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationFailure("pixels", "'pixels' values must lie in [0,1]")
    label = payload["label"]
    if isinstance(label, bool) or not isinstance(label, int):
        raise ValidationFailure("label", "'label' must be an integer")
    if not 0 <= label <= 9:
        raise ValidationFailure("label", f"'label' must be in 0..9, got {label}")
    return arr.astype(np.float32), label


def propose_response(classifier: ClassifierModel, coach: CoachModel,
                     pixels: np.ndarray, label: int) -> dict:
    """Run the coach and classifier on one drawing; shared by HTTP and CLI."""
    x = pixels.reshape(1, 1, 28, 28)
    proposal = coach.propose(x, [label])[0]
    probs_in = classifier.classify(x)[0]
    probs_prop = classifier.classify(proposal.reshape(1, 1, 28, 28))[0]
    l1_change = float(np.abs(pixels.astype(np.float64) - proposal.astype(np.float64)).mean())
    return {
        "proposal": [float(v) for v in proposal],
        "input_confidence": float(probs_in[label]),
        "proposal_confidence": float(probs_prop[label]),
        "input_ink": float(np.abs(pixels.astype(np.float64)).mean()),
        "proposal_ink": float(np.abs(proposal.astype(np.float64)).mean()),
        "l1_change": l1_change,
        "predicted_input_class": int(probs_in.argmax()),
        "predicted_proposal_class": int(probs_prop.argmax()),
    }


class ModelBundle:
    """The pair of loaded checkpoints a server process serves."""

    def __init__(self):
        self.classifier = None
        self.coach = None
        self.ids: dict[str, str] = {}
        self.checksums: dict[str, str] = {}

    @property
    def ready(self) -> bool:
        return self.classifier is not None and self.coach is not None

    def load(self, classifier_path, coach_path):
        classifier = load_checkpoint(classifier_path)
        coach = load_checkpoint(coach_path)
        if not isinstance(classifier, ClassifierModel):
            raise ValueError(f"{classifier_path} is not a classifier checkpoint")
        if not isinstance(coach, CoachModel):
            raise ValueError(f"{coach_path} is not a coach checkpoint")
        classifier.freeze()
        self.classifier, self.coach = classifier, coach
        self.ids = {"classifier": Path(classifier_path).name,
                    "coach": Path(coach_path).name}
        self.checksums = {"classifier": read_header(classifier_path)["checksum"],
                          "coach": read_header(coach_path)["checksum"]}


def create_app(classifier_path=None, coach_path=None) -> FastAPI:
    app = FastAPI(title="digit-coach")
    bundle = ModelBundle()
    app.state.models = bundle
    if classifier_path is not None and coach_path is not None:
        bundle.load(classifier_path, coach_path)

    @app.get("/health")
    def health():
        return {
            "status": "ready" if bundle.ready else "loading",
            "model_ids": bundle.ids,
            "checkpoint_checksums": bundle.checksums,
        }

    @app.post("/propose")
    async def propose(request: Request):
        if not bundle.ready:
            return JSONResponse(status_code=503,
                                content={"error": {"message": "models not loaded"}})
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={
                "error": {"field": "body", "message": "request body must be valid JSON"}})
        try:
            pixels, label = validate_request(payload)
        except ValidationFailure as e:
            return JSONResponse(status_code=400,
                                content={"error": {"field": e.field, "message": e.message}})
        return propose_response(bundle.classifier, bundle.coach, pixels, label)

    return app
