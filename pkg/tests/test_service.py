import base64
import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from nandkit.config import Config
from nandkit.service import create_app, map_payload


@pytest.fixture(scope="module")
def svc(tmp_path_factory):
    base = tmp_path_factory.mktemp("svc")
    from nandkit.synth import build_fixture

    build_fixture(base / "data", base / "cache", seed=42)
    cfg_path = base / "nand.cfg"
    cfg_path.write_text(
        f"dataset_root = {base/'data'}\ncache_dir = {base/'cache'}\nencoder = cache\n",
        encoding="utf-8",
    )
    cfg = Config(dataset_root=base / "data", cache_dir=base / "cache", encoder="cache")
    client = TestClient(create_app(cfg))
    return client, base, cfg_path


@pytest.fixture(scope="module")
def client(svc):
    return svc[0]


class TestMapPayload:
    def test_levels_and_minmax(self):
        values = np.array([[0.0, 1.0], [2.0, 4.0]])
        payload = map_payload(values)
        assert payload["min"] == 0.0 and payload["max"] == 4.0
        img = Image.open(io.BytesIO(base64.b64decode(payload["png_base64"])))
        levels = np.asarray(img)
        assert levels.dtype == np.uint8
        np.testing.assert_array_equal(levels, [[0, 64], [128, 255]])

    def test_constant_map(self):
        payload = map_payload(np.full((3, 3), 7.0))
        assert payload["min"] == payload["max"] == 7.0
        img = Image.open(io.BytesIO(base64.b64decode(payload["png_base64"])))
        assert np.asarray(img).max() == 0


class TestEndpoints:
    def test_health(self, client):
        r = client.get("/api/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_classes(self, client):
        assert client.get("/api/classes").json() == {"classes": ["widget"]}

    def test_groups(self, client):
        r = client.get("/api/classes/widget/groups")
        assert r.json()["groups"] == {"dent": ["dent"], "scuff": ["scuff"]}

    def test_images_split(self, client):
        r = client.get("/api/classes/widget/images", params={"split": "test"})
        items = r.json()["images"]
        assert len(items) == 36
        assert {"id", "anomaly_type"} <= set(items[0])

    def test_image_bytes(self, client):
        r = client.get("/api/images/widget/test/scuff/000.png")
        assert r.status_code == 200
        img = Image.open(io.BytesIO(r.content))
        assert img.size == (64, 64)

    def test_unknown_class_not_found(self, client):
        r = client.post(
            "/api/preview",
            json={"class": "nope", "image_id": "x", "normality_text": "y"},
        )
        assert r.status_code == 404
        assert "detail" in r.json()

    def test_unknown_image_not_found(self, client):
        r = client.post(
            "/api/preview",
            json={"class": "widget", "image_id": "widget/test/scuff/999.png", "normality_text": "y"},
        )
        assert r.status_code == 404

    def test_empty_normality_rejected(self, client):
        r = client.post(
            "/api/preview",
            json={"class": "widget", "image_id": "widget/test/scuff/000.png", "normality_text": "  "},
        )
        assert r.status_code == 400


class TestPreviewEndpoint:
    def test_payload_shape_and_dominance(self, client):
        r = client.post(
            "/api/preview",
            json={
                "class": "widget",
                "image_id": "widget/test/scuff/000.png",
                "normality_text": "scuff",
                "detector": "zs",
            },
        )
        assert r.status_code == 200
        data = r.json()
        assert data["score_after"] <= data["score_before"]
        for key in ("map_before", "map_sup", "map_after"):
            payload = data[key]
            assert set(payload) == {"png_base64", "min", "max", "height", "width"}
        assert data["map_sup"]["min"] >= 0.0
        assert data["map_sup"]["max"] <= 1.0
        assert (data["map_sup"]["height"], data["map_sup"]["width"]) == (256, 256)

    def test_identical_requests_byte_identical(self, client):
        body = {
            "class": "widget",
            "image_id": "widget/test/dent/003.png",
            "normality_text": "dent",
            "detector": "zs",
        }
        r1 = client.post("/api/preview", json=body)
        r2 = client.post("/api/preview", json=body)
        assert r1.content == r2.content


class TestEvaluateEndpoint:
    def test_scenario_numbers(self, client):
        r = client.post(
            "/api/evaluate", json={"class": "widget", "group": "scuff", "detector": "zs"}
        )
        assert r.status_code == 200
        data = r.json()
        assert data["auroc_before"] < 0.65
        assert data["auroc_after"] >= 0.95
        assert data["delta"] == data["auroc_after"] - data["auroc_before"]
        assert len(data["pairs"]) == 36

    def test_matches_cli_structured_file(self, svc, tmp_path):
        from click.testing import CliRunner

        from nandkit.cli import main

        client, base, cfg_path = svc
        api_report = client.post(
            "/api/evaluate", json={"class": "widget", "group": "scuff", "detector": "zs"}
        ).json()
        out = tmp_path / "cli_report.json"
        result = CliRunner().invoke(
            main,
            ["--config", str(cfg_path), "eval", "--class", "widget", "--group",
             "scuff", "--detector", "zs", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        cli_report = json.loads(out.read_text())["reports"][0]
        assert cli_report == api_report  # one code path, identical numbers

    def test_unknown_group(self, client):
        r = client.post("/api/evaluate", json={"class": "widget", "group": "nope"})
        assert r.status_code == 404
