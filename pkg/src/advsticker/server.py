"""HTTP scoring service backed by a synthetic landscape.

Speaks the same wire protocol as a real recognition service — POST /score
with a base64 PNG returns identity probabilities, GET /labels lists the
gallery — so remote-oracle clients can be exercised end to end without a
model. Scoring works backwards from pixels: the pasted sticker is located
by differencing the query image against the known clean face, and the
landscape is evaluated at the recovered position. The in-plane sticker
angle is not recovered; the service scores every image at angle zero.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .assets import make_bundle
from .geometry import CompositeParams, composite
from .io import decode_image_b64, to_uint8
from .oracle import SyntheticLandscape

_SEARCH_HALO = 3


class SyntheticImageScorer:
    """Maps face images to landscape scores by locating the sticker."""

    def __init__(self, landscape, face, sticker, surface, index):
        self.landscape = landscape
        self.face = np.asarray(face, dtype=float)
        self.sticker = sticker
        self.surface = surface
        self.index = index
        self._clean = to_uint8(self.face)
        self._renders = {}
        self._lock = threading.Lock()
        # centroid of changed pixels vs. true center, measured once on an
        # interior placement; corrects for bend/tilt asymmetry
        mid = index[len(index) // 2]
        rr, cc = np.nonzero(np.any(self._render(mid) != self._clean, axis=2))
        self._offset = (float(rr.mean()) - mid[0], float(cc.mean()) - mid[1])

    def labels(self):
        return list(self.landscape.labels)

    def _render(self, cell):
        with self._lock:
            cached = self._renders.get(cell)
        if cached is None:
            img = composite(self.face, self.sticker, self.surface,
                            CompositeParams(position=cell, angle=0.0))
            cached = to_uint8(img)
            with self._lock:
                self._renders[cell] = cached
        return cached

    def locate(self, quantized):
        """Most likely sticker center cell, or None for a clean image."""
        diff = np.any(quantized != self._clean, axis=2)
        if not diff.any():
            return None
        rr, cc = np.nonzero(diff)
        guess = (rr.mean() - self._offset[0], cc.mean() - self._offset[1])
        near = [cell for cell in self.index
                if abs(cell[0] - guess[0]) <= _SEARCH_HALO
                and abs(cell[1] - guess[1]) <= _SEARCH_HALO]
        if not near:
            near = [min(self.index,
                        key=lambda cell: (cell[0] - guess[0]) ** 2
                        + (cell[1] - guess[1]) ** 2)]
        q = quantized.astype(np.int32)

        def residual(cell):
            return int(((q - self._render(cell).astype(np.int32)) ** 2).sum())

        return min(near, key=residual)

    def score_image(self, image):
        arr = to_uint8(image)
        if arr.shape != self._clean.shape:
            raise ValueError(f"expected image shape {self._clean.shape}, "
                             f"got {arr.shape}")
        cell = self.locate(arr)
        if cell is None:
            return self.landscape.no_attack()
        return self.landscape.score_at(cell[0], cell[1], 0.0)


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass

    def _reply(self, code, payload):
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/labels":
            self._reply(200, {"labels": self.server.scorer.labels()})
        elif self.path == "/health":
            self._reply(200, {"status": "ok"})
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        if self.path != "/score":
            self._reply(404, {"error": f"unknown path {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length") or 0)
            payload = json.loads(self.rfile.read(length))
            if not isinstance(payload, dict) or "image" not in payload:
                raise ValueError("request must be a JSON object with an 'image'")
            top_k = payload.get("top_k")
            if top_k is not None and (not isinstance(top_k, int) or top_k < 1):
                raise ValueError("top_k must be a positive integer")
            image = decode_image_b64(payload["image"])
            result = self.server.scorer.score_image(image)
        except (ValueError, TypeError, OSError) as exc:
            self._reply(400, {"error": str(exc)})
            return
        scores = result.as_scores()
        if top_k is not None:
            scores = scores[:top_k]
        self._reply(200, {"scores": scores})


def make_server(scorer, host="127.0.0.1", port=0):
    """Bound (not yet serving) HTTP server; port 0 picks a free port."""
    server = ThreadingHTTPServer((host, port), _Handler)
    server.scorer = scorer
    return server


def build_scorer(seed=0, size=64, **landscape_knobs):
    """Scorer over the deterministic demo assets for this seed and size."""
    bundle = make_bundle(seed, size=size)
    landscape = SyntheticLandscape(seed=seed, index=bundle.index,
                                   **landscape_knobs)
    return SyntheticImageScorer(landscape, bundle.face, bundle.sticker,
                                bundle.surface, bundle.index)


def serve(host="127.0.0.1", port=8750, seed=0, size=64, **landscape_knobs):
    """Build the demo scorer and serve it until interrupted. Blocking."""
    server = make_server(build_scorer(seed, size, **landscape_knobs),
                         host=host, port=port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
