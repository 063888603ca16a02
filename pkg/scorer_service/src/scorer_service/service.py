"""HTTP scoring service: an enrollable face-recognition oracle.

Four endpoints:

* ``POST /score``   — JSON ``{"image": <base64>, "top_k": K?}`` in, ranked
  ``{"scores": [{"label", "prob"}, ...]}`` out.
* ``GET  /labels``  — enrolled identity labels.
* ``POST /gallery`` — multipart enrolment: a ``label`` field plus one or
  more image files.  Re-enrolling a label averages over all images ever
  supplied for it.
* ``GET  /health``  — liveness probe.

Probabilities are a softmax over ``temperature * cosine(probe, identity)``
across the full gallery, so they always sum to one no matter what ``top_k``
truncates from the listing.  Scoring is deterministic for identical input
bytes; malformed requests get 400, scoring an empty gallery gets 409.

The service wraps exactly one backbone instance; choosing a different one
(seed, embedding width, input size) is a construction-time decision on
``create_app``.  Face detection, alignment, and liveness are out of scope —
clients are expected to send pre-cropped images.
"""

import base64

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .backbone import EMBED_DIM, INPUT_SIZE, EmbeddingBackbone
from .gallery import EmptyGalleryError, Gallery

DEFAULT_TEMPERATURE = 10.0


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def _bad_request(detail):
    return JSONResponse({"detail": detail}, status_code=400)


def create_app(*, seed: int = 0, temperature: float = DEFAULT_TEMPERATURE,
               embed_dim: int = EMBED_DIM,
               input_size: int = INPUT_SIZE) -> FastAPI:
    """Build one service instance around a freshly constructed backbone."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    backbone = EmbeddingBackbone(seed=seed, dim=embed_dim,
                                 input_size=input_size)
    gallery = Gallery(embed_dim)
    app = FastAPI(title="scorer-service", docs_url=None, redoc_url=None)
    # exposed for tests and embedding callers; the HTTP surface is the API
    app.state.backbone = backbone
    app.state.gallery = gallery
    app.state.temperature = float(temperature)

    @app.exception_handler(RequestValidationError)
    async def _invalid(request, exc):
        return _bad_request("invalid request")

    @app.get("/health")
    def health():
        return {"status": "ok", "gallery_size": len(gallery)}

    @app.get("/labels")
    def labels():
        return {"labels": gallery.labels()}

    @app.post("/gallery")
    async def enroll(label: str = Form(...),
                     images: list[UploadFile] = File(default=[])):
        if not label.strip():
            return _bad_request("label must be a non-empty string")
        blobs = [await upload.read() for upload in images]
        if not blobs:
            return _bad_request("at least one image file is required")
        try:
            vectors = backbone.embed_many(blobs)
        except ValueError as exc:
            return _bad_request(str(exc))
        total = gallery.enroll(label, vectors)
        return {"label": label, "images": total}

    @app.post("/score")
    async def score(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON")
        if not isinstance(payload, dict) or "image" not in payload:
            return _bad_request("payload must be an object with an 'image' field")
        encoded = payload["image"]
        if not isinstance(encoded, str):
            return _bad_request("'image' must be a base64 string")
        try:
            raw = base64.b64decode(encoded, validate=True)
        except Exception:
            return _bad_request("'image' is not valid base64")
        top_k = payload.get("top_k")
        if top_k is not None:
            if isinstance(top_k, bool) or not isinstance(top_k, int) or top_k < 1:
                return _bad_request("'top_k' must be a positive integer")
        try:
            gallery_labels, matrix = gallery.snapshot()
        except EmptyGalleryError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=409)
        try:
            vec = backbone.embed_one(raw)
        except ValueError as exc:
            return _bad_request(str(exc))
        unit = vec / max(float(np.linalg.norm(vec)), 1e-12)
        cosines = matrix @ unit
        probs = softmax(app.state.temperature * cosines)
        order = sorted(range(len(gallery_labels)),
                       key=lambda i: (-probs[i], gallery_labels[i]))
        scores = [{"label": gallery_labels[i], "prob": float(probs[i])}
                  for i in order]
        if top_k is not None:
            scores = scores[:top_k]
        return {"scores": scores}

    return app
