import math

from fastapi.testclient import TestClient

from main import app

client = TestClient(app)

FROZEN_SYSTEM = {
    "kind": "skew_product",
    "fiber_grid": 4,
    "base": {"kind": "bernoulli", "p": [0.5, 0.5]},
    "cocycle": {"kind": "constant"},
}


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_word_distance():
    response = client.post("/metrics/fbar/words", json={"first": [0, 1, 0, 1], "second": [1, 0, 1, 0]})
    assert response.status_code == 200
    data = response.json()
    assert data["value"] == 0.25
    assert data["method"] == "exact"


def test_word_distance_length_mismatch():
    response = client.post("/metrics/dbar/words", json={"first": [0, 1], "second": [0]})
    assert response.status_code == 400


def test_unknown_metric():
    response = client.post("/metrics/hamming/words", json={"first": [0], "second": [0]})
    assert response.status_code == 404


def test_distribution_distance():
    response = client.post("/metrics/dbar/distributions", json={
        "first": {"weights": {"0 0": 0.5, "1 1": 0.5}},
        "second": {"weights": {"0 1": 0.5, "1 0": 0.5}},
    })
    assert response.status_code == 200
    data = response.json()
    assert math.isclose(data["value"], 0.5)
    assert data["support_sizes"] == [2, 2]


def test_distribution_must_be_normalised():
    response = client.post("/metrics/fbar/distributions", json={
        "first": {"weights": {"0 0": 0.5}},
        "second": {"weights": {"0 1": 1.0}},
    })
    assert response.status_code == 422


def test_entropy_in_bits():
    response = client.post("/entropy", json={"sample": [0, 1] * 500, "n": 1, "bits": True})
    assert response.status_code == 200
    data = response.json()
    assert data["units"] == "bits"
    assert math.isclose(data["value"], 1.0)


def test_vwb_on_period_two():
    response = client.post("/diagnostics/vwb", json={"sample": [0, 1] * 500, "n": 4, "k": 2})
    assert response.status_code == 200
    data = response.json()
    assert data["verdict"] is False
    assert data["statistic"] == "vwb"


def test_unknown_diagnostic():
    response = client.post("/diagnostics/mixing", json={"sample": [0, 1], "n": 1})
    assert response.status_code == 404


def test_rwm_on_frozen_fiber():
    response = client.post("/diagnostics/rwm", json={"system": FROZEN_SYSTEM, "schedule": [16, 32], "windows": 16})
    assert response.status_code == 200
    data = response.json()
    assert data["verdict"] is False
    assert len(data["trace"]) == 2


def test_relmix_on_frozen_fiber():
    response = client.post("/diagnostics/relmix", json={"system": FROZEN_SYSTEM, "lag": 3, "windows": 10})
    assert response.status_code == 200
    assert math.isclose(response.json()["values"]["value"], 0.25)
