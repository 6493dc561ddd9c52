"""Tests for the FastAPI application routes."""

from __future__ import annotations

import csv
import io

import pytest

from mimo_ura._config import config_to_dict, small_config

SMALL = {
    "n": 160,
    "num_subslots": 4,
    "index_bits": 8,
    "payload_bits": 16,
    "parity_profile": [0, 4, 4, 8],
    "ebn0_db": 0.0,
    "active_users": 2,
    "antennas": 16,
}
DESIGN = {"index_bits": 12, "outer_rate": 0.25, "num_subslots": 32, "n": 3200, "active_users": 300, "ebn0": 1.0}


def _post_run(test_client, **body):
    return test_client.post("/runs", json={"config": SMALL, "trials": 2, **body})


class TestHealth:
    def test_ok(self, test_client) -> None:
        resp = test_client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}


class TestDesign:
    def test_reference_point(self, test_client) -> None:
        resp = test_client.post("/design", json=DESIGN)
        assert resp.status_code == 200
        data = resp.json()
        assert data["sum_rate"]["lhs_bits"] == 900
        assert data["user_caps"]["outer_approx"] == 1024

    def test_unknown_field(self, test_client) -> None:
        resp = test_client.post("/design", json={"index_bits": 12, "bogus": 1})
        assert resp.status_code == 400
        assert resp.headers["content-type"] == "application/problem+json"

    def test_invalid_value(self, test_client) -> None:
        resp = test_client.post("/design", json={**DESIGN, "index_bits": 0})
        assert resp.status_code == 400

    def test_body_must_be_object(self, test_client) -> None:
        resp = test_client.post("/design", content=b"[1, 2]", headers={"content-type": "application/json"})
        assert resp.status_code == 400
        assert resp.json()["errors"][0]["pointer"] == "/body"

    def test_body_must_be_json(self, test_client) -> None:
        resp = test_client.post("/design", content=b"not json", headers={"content-type": "application/json"})
        assert resp.status_code == 400


class TestRunLifecycle:
    def test_create_trial_run(self, test_client) -> None:
        resp = _post_run(test_client, seed=5)
        assert resp.status_code == 201
        summary = resp.json()
        assert summary["kind"] == "trial"
        assert summary["id"].startswith("urn:uuid:")
        location = resp.headers["location"]
        assert location == f"/runs/{summary['id'].removeprefix('urn:uuid:')}"

        resp = test_client.get(location)
        assert resp.status_code == 200
        data = resp.json()
        assert data["config"]["subslot_length"] == 40
        assert data["result"]["master_seed"] == 5
        (point,) = data["result"]["points"]
        assert point["trials"] == 2
        assert point["p_e"] == pytest.approx(point["p_md"] + point["p_fa"])

    def test_create_sweep_and_fetch_csv(self, test_client) -> None:
        resp = _post_run(test_client, axis="antennas", values=[8, 16], seed=1)
        assert resp.status_code == 201
        assert resp.json()["kind"] == "sweep"

        resp = test_client.get(f"{resp.headers['location']}/sweep.csv")
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("text/csv")
        rows = list(csv.DictReader(io.StringIO(resp.text)))
        assert [float(r["axis"]) for r in rows] == [8.0, 16.0]

    def test_same_seed_same_metrics(self, test_client) -> None:
        first = test_client.get(_post_run(test_client, seed=9).headers["location"]).json()
        second = test_client.get(_post_run(test_client, seed=9).headers["location"]).json()
        keys = ("p_md", "p_fa", "p_e", "ci95")
        assert [first["result"]["points"][0][k] for k in keys] == [second["result"]["points"][0][k] for k in keys]

    def test_list_and_filter(self, test_client) -> None:
        _post_run(test_client)
        _post_run(test_client, axis="ka", values=[1])
        assert len(test_client.get("/runs").json()) == 2
        sweeps = test_client.get("/runs", params={"kind": "sweep"}).json()
        assert [s["kind"] for s in sweeps] == ["sweep"]

    def test_delete(self, test_client) -> None:
        location = _post_run(test_client).headers["location"]
        assert test_client.delete(location).status_code == 204
        assert test_client.get(location).status_code == 404
        assert test_client.delete(location).status_code == 204

    def test_missing_run(self, test_client) -> None:
        resp = test_client.get("/runs/00000000-0000-0000-0000-000000000000")
        assert resp.status_code == 404
        assert resp.headers["content-type"] == "application/problem+json"
        assert test_client.get("/runs/00000000-0000-0000-0000-000000000000/sweep.csv").status_code == 404

    def test_config_round_trip_accepted(self, test_client) -> None:
        resp = test_client.post("/runs", json={"config": config_to_dict(small_config(antennas=8)), "trials": 1})
        assert resp.status_code == 201


class TestRunValidation:
    def test_config_violation_points_at_field(self, test_client) -> None:
        resp = test_client.post("/runs", json={"config": {**SMALL, "n": 161}, "trials": 1})
        assert resp.status_code == 400
        error = resp.json()["errors"][0]
        assert error["pointer"] == "/config/n"
        assert error["detail"].startswith("NON_DIVISIBLE_SLOT")

    def test_unknown_config_key(self, test_client) -> None:
        resp = test_client.post("/runs", json={"config": {**SMALL, "bandwidth": 5}, "trials": 1})
        assert resp.status_code == 400
        assert resp.json()["errors"][0]["detail"].startswith("INVALID_FIELD")

    @pytest.mark.parametrize("trials", [0, -1, 10_001, "3", 1.5])
    def test_bad_trials(self, test_client, trials) -> None:
        resp = _post_run(test_client, trials=trials)
        assert resp.status_code == 400
        assert resp.json()["errors"][0]["pointer"] == "/trials"

    @pytest.mark.parametrize("seed", [-1, 1 << 64, "7"])
    def test_bad_seed(self, test_client, seed) -> None:
        resp = _post_run(test_client, seed=seed)
        assert resp.status_code == 400
        assert resp.json()["errors"][0]["pointer"] == "/seed"

    def test_axis_without_values(self, test_client) -> None:
        resp = _post_run(test_client, axis="ka")
        assert resp.status_code == 400
        assert resp.json()["errors"][0]["pointer"] == "/axis"

    def test_unknown_axis(self, test_client) -> None:
        resp = _post_run(test_client, axis="bandwidth", values=[1])
        assert resp.json()["errors"][0]["pointer"] == "/axis"

    def test_empty_values(self, test_client) -> None:
        resp = _post_run(test_client, axis="ka", values=[])
        assert resp.json()["errors"][0]["pointer"] == "/values"

    def test_no_config_and_no_default(self, test_client, monkeypatch) -> None:
        monkeypatch.delenv("MIMO_URA_CONFIG", raising=False)
        resp = test_client.post("/runs", json={"trials": 1})
        assert resp.status_code == 400
        assert resp.json()["errors"][0]["detail"].startswith("INVALID_FIELD")

    def test_default_config_file(self, test_client, monkeypatch, tmp_path) -> None:
        path = tmp_path / "small.toml"
        path.write_text(
            'n = 160\nnum_subslots = 4\nindex_bits = 8\npayload_bits = 16\nparity_profile = [0, 4, 4, 8]\n'
            "ebn0_db = 0.0\nactive_users = 1\nantennas = 8\n",
            encoding="utf-8",
        )
        monkeypatch.setenv("MIMO_URA_CONFIG", str(path))
        resp = test_client.post("/runs", json={"trials": 1})
        assert resp.status_code == 201
