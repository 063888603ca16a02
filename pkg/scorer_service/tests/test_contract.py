"""Wire-contract tests between the service and the attack toolkit's client.

The JSON files under ``fixtures/`` are recorded traffic: a real
``advsticker.RemoteOracle`` driven against this service (see
``scripts/record_fixtures.py``), with request and response bodies taped
verbatim.  They pin the contract from both sides:

* the service must keep producing the recorded responses for the recorded
  requests (`test_live_service_matches_recorded_fixtures`);
* the client must keep building byte-identical requests and parsing the
  recorded responses with zero schema errors
  (`test_remote_client_replays_recorded_fixtures`).

A drift in either direction — renamed fields, reordered listings, changed
preprocessing or backbone numerics — fails here first, with the fixture
name in the diff.
"""

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from advsticker import RemoteOracle
from scorer_service import create_app

from service_helpers import as_float_image, b64, enroll

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"
SCORE_FIXTURES = sorted(FIXTURE_DIR.glob("score_*.json"))
LABELS_FIXTURE = FIXTURE_DIR / "labels.json"


def load(path):
    return json.loads(path.read_text())


def test_fixture_corpus_is_present():
    assert len(SCORE_FIXTURES) >= 4
    assert LABELS_FIXTURE.exists()


@pytest.fixture(scope="module")
def recorded_service(ten_identity_gallery):
    """A service built and enrolled exactly as the fixtures were recorded."""
    meta = load(LABELS_FIXTURE)["gallery"]
    assert meta["identities"] == len(ten_identity_gallery)
    assert all(len(blobs) == meta["images_per"]
               for blobs in ten_identity_gallery.values())
    client = TestClient(create_app(seed=meta["backbone_seed"]))
    enroll(client, ten_identity_gallery)
    return client


@pytest.mark.parametrize("path", SCORE_FIXTURES, ids=lambda p: p.stem)
def test_live_service_matches_recorded_fixtures(recorded_service, path):
    fixture = load(path)
    resp = recorded_service.post(fixture["request"]["path"],
                                 json=fixture["request"]["body"])
    assert resp.status_code == fixture["response"]["status"]
    assert resp.json() == fixture["response"]["body"]


def test_live_labels_match_recorded_fixture(recorded_service):
    fixture = load(LABELS_FIXTURE)
    resp = recorded_service.get(fixture["request"]["path"])
    assert resp.status_code == fixture["response"]["status"]
    assert resp.json() == fixture["response"]["body"]


class _ReplayHandler(BaseHTTPRequestHandler):
    """Serves one recorded response, taping what the client actually sent."""

    state = None  # {"fixture": dict, "received": list}

    def _send(self, status, body):
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length))
        self.state["received"].append((self.path, body))
        fixture = self.state["fixture"]
        self._send(fixture["response"]["status"], fixture["response"]["body"])

    def do_GET(self):
        fixture = self.state["fixture"]
        self._send(fixture["response"]["status"], fixture["response"]["body"])

    def log_message(self, *args):
        pass


@pytest.fixture()
def replay_server():
    state = {"fixture": None, "received": []}
    handler = type("Handler", (_ReplayHandler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", state
    finally:
        server.shutdown()
        thread.join(5)


@pytest.mark.parametrize("path", SCORE_FIXTURES, ids=lambda p: p.stem)
def test_remote_client_replays_recorded_fixtures(replay_server, path):
    url, state = replay_server
    fixture = load(path)
    state["fixture"] = fixture
    request_body = fixture["request"]["body"]
    image = as_float_image(base64.b64decode(request_body["image"]))

    oracle = RemoteOracle(url, top_k=request_body.get("top_k"), retries=0)
    result = oracle.query(image=image)  # RemoteError would fail the test

    # the client rebuilt the exact recorded request, byte for byte
    assert state["received"] == [("/score", request_body)]
    # and parsed the recorded response without loss
    assert result.as_scores() == fixture["response"]["body"]["scores"]
    assert oracle.counter.count == 1


def test_remote_client_parses_recorded_labels(replay_server):
    url, state = replay_server
    fixture = load(LABELS_FIXTURE)
    state["fixture"] = fixture
    assert RemoteOracle(url, retries=0).labels() == \
        fixture["response"]["body"]["labels"]


def test_self_enrollment_top1_sanity(recorded_service, ten_identity_gallery):
    """Every enrolled image of every identity scores its own label first."""
    assert len(ten_identity_gallery) == 10
    for label, blobs in ten_identity_gallery.items():
        for blob in blobs:
            resp = recorded_service.post("/score", json={"image": b64(blob)})
            assert resp.status_code == 200
            scores = resp.json()["scores"]
            assert scores[0]["label"] == label, (label, scores[:2])
