"""Record wire fixtures for the scoring contract tests.

Drives a real ``advsticker.RemoteOracle`` against a freshly built service
(in-process, via the test client as the oracle's HTTP session) and captures
each exchange verbatim: the request body exactly as the client built it and
the response body exactly as the service returned it.  The recorded JSON
files are committed under ``tests/fixtures/`` and replayed by both sides of
the contract — the service must keep producing these responses, and the
client must keep building these requests and parsing these responses.

Re-run (from the repository root) after any deliberate change to the wire
format or to the backbone's numerics:

    python3 scorer_service/scripts/record_fixtures.py
"""

import io
import json
import sys
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from advsticker import RemoteOracle
from scorer_service import create_app, identity_image, toy_gallery

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
BASE = "http://scorer.test"

N_IDENTITIES = 10
IMAGES_PER = 3
BACKBONE_SEED = 0


class CaptureClient(TestClient):
    """Test client that doubles as the oracle's session, taping exchanges."""

    def __init__(self, app):
        super().__init__(app, base_url=BASE)
        self.exchanges = []

    def post(self, url, json=None, timeout=None, **kwargs):  # noqa: A002
        resp = super().post(url, json=json, **kwargs)
        self.exchanges.append({"path": url.replace(BASE, "", 1),
                               "body": json,
                               "status": resp.status_code,
                               "response": resp.json()})
        return resp

    def get(self, url, timeout=None, **kwargs):
        return super().get(url, **kwargs)


def as_float_image(png: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(png)) as im:
        return np.asarray(im.convert("RGB"), dtype=float) / 255.0


def main():
    app = create_app(seed=BACKBONE_SEED)
    client = CaptureClient(app)
    for label, blobs in toy_gallery(N_IDENTITIES, IMAGES_PER).items():
        resp = client.post(
            f"{BASE}/gallery", data={"label": label},
            files=[("images", (f"{i}.png", blob, "image/png"))
                   for i, blob in enumerate(blobs)])
        resp.raise_for_status()
    client.exchanges.clear()  # fixtures cover /score traffic only

    probes = [
        ("score_full_listing", identity_image(0, 0), None),
        ("score_top1", identity_image(3, 1), 1),
        ("score_top3", identity_image(7, 2), 3),
        ("score_unseen_probe", identity_image(42, 0), None),
    ]
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for name, png, top_k in probes:
        oracle = RemoteOracle(BASE, top_k=top_k, session=client)
        oracle.query(image=as_float_image(png))
        taped = client.exchanges.pop()
        assert taped["status"] == 200, (name, taped)
        fixture = {
            "name": name,
            "gallery": {"identities": N_IDENTITIES, "images_per": IMAGES_PER,
                        "backbone_seed": BACKBONE_SEED},
            "request": {"path": taped["path"], "body": taped["body"]},
            "response": {"status": taped["status"], "body": taped["response"]},
        }
        path = FIXTURES / f"{name}.json"
        path.write_text(json.dumps(fixture, indent=2) + "\n")
        print(f"wrote {path}")

    labels = RemoteOracle(BASE, session=client).labels()
    path = FIXTURES / "labels.json"
    path.write_text(json.dumps(
        {"name": "labels",
         "gallery": {"identities": N_IDENTITIES, "images_per": IMAGES_PER,
                     "backbone_seed": BACKBONE_SEED},
         "request": {"path": "/labels"},
         "response": {"status": 200, "body": {"labels": labels}}},
        indent=2) + "\n")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
