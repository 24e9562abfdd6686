import pytest
from fastapi.testclient import TestClient

from detector_bridge import BridgeConfig, create_app
from wire_fixtures import StubDetector


@pytest.fixture
def stub():
    return StubDetector(
        rows=[{"box": [4.0, 4.0, 20.0, 20.0], "label": 17, "score": 0.62}]
    )


@pytest.fixture
def client(stub):
    app = create_app(BridgeConfig(), detector=stub)
    return TestClient(app, raise_server_exceptions=False)
