import json
from pathlib import Path

import numpy as np
import pytest
import requests

from rectflip.datasets import make_suite
from rectflip.oracle import ToyDetector
from rectflip.protocol import (
    PROTOCOL_VERSION,
    PayloadValidationError,
    ProtocolError,
    VersionMismatch,
    build_detect_request,
    build_detect_response,
    build_health_response,
    decode_image,
    encode_image,
    parse_detect_request,
    parse_detect_response,
)
from rectflip.remote import RemoteDetector, TransportError
from rectflip.server import BackgroundServer

VECTORS = json.loads(
    (Path(__file__).parent / "data" / "protocol_vectors.json").read_text()
)


def outcome_of(fn, body):
    try:
        fn(body)
        return "ok"
    except VersionMismatch:
        return "version_mismatch"
    except PayloadValidationError:
        return "payload_error"
    except ProtocolError:
        return "protocol_error"


@pytest.mark.parametrize(
    "vector", VECTORS["requests"], ids=lambda v: v["name"]
)
def test_request_vectors(vector):
    assert outcome_of(parse_detect_request, vector["body"]) == vector["expect"]


@pytest.mark.parametrize(
    "vector", VECTORS["responses"], ids=lambda v: v["name"]
)
def test_response_vectors(vector):
    assert outcome_of(parse_detect_response, vector["body"]) == vector["expect"]


def test_image_codec_round_trip_is_lossless_on_8bit_values():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(40, 48, 3)).astype(np.float64) / 255.0
    decoded = decode_image(encode_image(img), 48, 40)
    assert np.array_equal(decoded, img)


def test_request_builder_round_trips():
    img = np.full((40, 48, 3), 77.0 / 255.0)
    req = build_detect_request(img)
    assert req["protocol"] == PROTOCOL_VERSION
    assert (req["width"], req["height"]) == (48, 40)
    assert np.array_equal(parse_detect_request(req), img)


def test_response_builder_omits_absent_runner_up(toy):
    img = make_suite(1, seed=0)[0].image
    dets = toy.detect(img)
    body = build_detect_response(dets, 3)
    parsed, num_classes = parse_detect_response(body)
    assert num_classes == 3
    assert parsed == dets

    from rectflip.geometry import Box
    from rectflip.objective import Detection

    bare = Detection(box=Box(0.0, 0.0, 4.0, 4.0), label=0, score=0.9)
    body = build_detect_response([bare], 3)
    assert "score2" not in body["detections"][0]
    parsed, _ = parse_detect_response(body)
    assert parsed[0].score2 is None


def test_health_payload_shape():
    body = build_health_response(3, "toy")
    assert body == {"protocol": 1, "num_classes": 3, "name": "toy"}


def test_served_toy_matches_local_detector(toy):
    img = make_suite(1, seed=8)[0].image
    with BackgroundServer() as server:
        remote = RemoteDetector(server.endpoint)
        # metadata first: forces the health round trip, which also adopts
        # the service's advertised name
        info = remote.metadata()
        assert info.num_classes == 3
        assert info.name == "toy"
        assert remote.detect(img) == toy.detect(img)
        # once the class count is known no further health call is needed
        assert remote.metadata().num_classes == 3


def test_served_error_codes():
    with BackgroundServer() as server:
        url = server.endpoint + "/v1/detect"

        r = requests.post(url, data=b"{not json", headers={"Content-Type": "application/json"})
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "bad_json"

        for vector in VECTORS["requests"]:
            if vector["expect"] == "ok":
                continue
            r = requests.post(url, json=vector["body"])
            assert r.status_code == 400, vector["name"]
            assert r.json()["error"]["code"] == vector["expect"], vector["name"]

        r = requests.get(server.endpoint + "/v1/nope")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "not_found"

        # a valid request whose image the toy detector cannot process
        tiny = build_detect_request(np.full((16, 16, 3), 0.5))
        r = requests.post(url, json=tiny)
        assert r.status_code == 500
        assert r.json()["error"]["code"] == "inference_error"


def test_ok_vector_accepted_by_served_toy():
    ok = next(v for v in VECTORS["requests"] if v["name"] == "ok_minimal")
    with BackgroundServer() as server:
        r = requests.post(server.endpoint + "/v1/detect", json=ok["body"])
        assert r.status_code == 200
        dets, num_classes = parse_detect_response(r.json())
        assert num_classes == 3
        assert dets == []  # flat gray image has nothing to detect


def test_remote_detector_wraps_transport_failures():
    remote = RemoteDetector("http://127.0.0.1:9", timeout=0.5)
    with pytest.raises(TransportError):
        remote.detect(np.full((32, 32, 3), 0.5))
    with pytest.raises(TransportError):
        remote.metadata()


def test_remote_detector_surfaces_server_side_errors():
    with BackgroundServer() as server:
        remote = RemoteDetector(server.endpoint)
        with pytest.raises(TransportError):
            remote.detect(np.full((16, 16, 3), 0.5))  # 500 from the oracle
