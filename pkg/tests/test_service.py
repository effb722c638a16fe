"""HTTP surface: validation errors, readiness, and response semantics."""
import json
import subprocess
import sys

import numpy as np
import pytest
from fastapi.testclient import TestClient

from digit_coach.models import ClassifierModel, CoachModel
from digit_coach.persistence import save_checkpoint
from digit_coach.service import (ValidationFailure, create_app, propose_response,
                                 validate_request)


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory):
    d = tmp_path_factory.mktemp("ckpts")
    clf = ClassifierModel(seed=1)
    clf.freeze()
    save_checkpoint(clf, d / "classifier.ckpt")
    save_checkpoint(CoachModel(seed=2), d / "coach.ckpt")
    return d / "classifier.ckpt", d / "coach.ckpt"


@pytest.fixture(scope="module")
def client(checkpoints):
    clf, coach = checkpoints
    return TestClient(create_app(clf, coach))


def valid_payload():
    rng = np.random.default_rng(3)
    return {"pixels": rng.random(784).round(6).tolist(), "label": 3}


class TestValidation:
    def test_wrong_pixel_count_names_field(self, client):
        payload = valid_payload()
        payload["pixels"] = payload["pixels"][:783]
        r = client.post("/propose", json=payload)
        assert r.status_code == 400
        assert r.json()["error"]["field"] == "pixels"
        assert "783" in r.json()["error"]["message"]

    def test_label_out_of_range_names_field(self, client):
        payload = valid_payload()
        payload["label"] = 10
        r = client.post("/propose", json=payload)
        assert r.status_code == 400
        assert r.json()["error"]["field"] == "label"

    def test_pixel_out_of_range(self, client):
        payload = valid_payload()
        payload["pixels"][5] = 1.5
        r = client.post("/propose", json=payload)
        assert r.status_code == 400
        assert r.json()["error"]["field"] == "pixels"

    def test_non_numeric_pixels(self, client):
        payload = valid_payload()
        payload["pixels"][0] = "dark"
        r = client.post("/propose", json=payload)
        assert r.status_code == 400
        assert r.json()["error"]["field"] == "pixels"

    def test_missing_label(self, client):
        r = client.post("/propose", json={"pixels": [0.0] * 784})
        assert r.status_code == 400
        assert r.json()["error"]["field"] == "label"

    def test_boolean_label_rejected(self):
        with pytest.raises(ValidationFailure):
            validate_request({"pixels": [0.0] * 784, "label": True})

    def test_malformed_json_body(self, client):
        r = client.post("/propose", content=b"{not json",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400


class TestReadiness:
    def test_unloaded_service_503(self):
        bare = TestClient(create_app())
        r = bare.post("/propose", json=valid_payload())
        assert r.status_code == 503

    def test_health_loading_state(self):
        bare = TestClient(create_app())
        body = bare.get("/health").json()
        assert body["status"] == "loading"

    def test_health_ready_state(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ready"
        assert set(body["checkpoint_checksums"]) == {"classifier", "coach"}
        assert len(body["checkpoint_checksums"]["classifier"]) == 64

    def test_health_idempotent(self, client):
        assert client.get("/health").json() == client.get("/health").json()


class TestPropose:
    def test_valid_request_shape(self, client):
        r = client.post("/propose", json={"pixels": [0.0] * 784, "label": 3})
        assert r.status_code == 200
        body = r.json()
        assert len(body["proposal"]) == 784
        assert all(0.0 <= v <= 1.0 for v in body["proposal"])
        for key in ("input_confidence", "proposal_confidence", "input_ink",
                    "proposal_ink", "l1_change", "predicted_input_class",
                    "predicted_proposal_class"):
            assert key in body
        assert 0.0 <= body["input_confidence"] <= 1.0
        assert body["l1_change"] >= 0.0
        assert body["input_ink"] == 0.0

    def test_identical_requests_identical_bodies(self, client):
        payload = valid_payload()
        a = client.post("/propose", json=payload)
        b = client.post("/propose", json=payload)
        assert a.json() == b.json()

    def test_requests_do_not_mutate_models(self, client):
        before = client.get("/health").json()["checkpoint_checksums"]
        for _ in range(3):
            client.post("/propose", json=valid_payload())
        assert client.get("/health").json()["checkpoint_checksums"] == before

    def test_matches_cli_propose(self, client, checkpoints, tmp_path):
        clf_path, coach_path = checkpoints
        payload = valid_payload()
        request_file = tmp_path / "req.json"
        request_file.write_text(json.dumps(payload))
        out_file = tmp_path / "resp.json"
        subprocess.run(
            [sys.executable, "-m", "digit_coach.cli", "propose",
             "--classifier", str(clf_path), "--coach", str(coach_path),
             "--input", str(request_file), "--out", str(out_file)],
            check=True, capture_output=True)
        cli_body = json.loads(out_file.read_text())
        http_body = client.post("/propose", json=payload).json()
        for key in http_body:
            if key == "proposal":
                np.testing.assert_allclose(cli_body[key], http_body[key], atol=1e-6)
            elif isinstance(http_body[key], float):
                assert cli_body[key] == pytest.approx(http_body[key], abs=1e-6)
            else:
                assert cli_body[key] == http_body[key]

    def test_response_is_pure_function_of_request(self, checkpoints):
        # a second app instance over the same checkpoints answers identically
        clf, coach = checkpoints
        payload = valid_payload()
        a = TestClient(create_app(clf, coach)).post("/propose", json=payload)
        b = TestClient(create_app(clf, coach)).post("/propose", json=payload)
        assert a.json() == b.json()
