import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from scorer_service import create_app, toy_gallery

# make service_helpers importable no matter which directory pytest runs from
sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def app():
    return create_app(seed=0)


@pytest.fixture
def client(app):
    return TestClient(app)


@pytest.fixture(scope="session")
def ten_identity_gallery():
    return toy_gallery(n_identities=10, images_per=3)
