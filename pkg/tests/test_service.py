import sys
import textwrap
import threading

import pytest
from fastapi.testclient import TestClient

from scribebench.engines import EngineHandle, train_reference
from scribebench.service import create_app
from scribebench.synth import default_atlas, random_sentences, render_line, write_corpus

ALAPH = "ܐ"
BETH = "ܒ"


@pytest.fixture()
def root(tmp_path):
    write_corpus(tmp_path / "data", 12, seed=3)
    return tmp_path / "data"


@pytest.fixture()
def client(root):
    atlas = default_atlas()
    lines = [render_line(s, atlas) for s in random_sentences(40, seed=6, atlas=atlas)]
    model = train_reference(lines)
    engines = {"reference": EngineHandle(kind="reference", model=model)}
    app = create_app(root, engines=engines)
    return TestClient(app)


def first_id(client) -> str:
    return client.get("/samples").json()["items"][0]["id"]


class TestListing:
    def test_healthz(self, client):
        doc = client.get("/healthz").json()
        assert doc["status"] == "ok"
        assert doc["samples"] == 12

    def test_list_pagination(self, client):
        doc = client.get("/samples", params={"page_size": 5}).json()
        assert doc["total"] == 12
        assert doc["pages"] == 3
        assert len(doc["items"]) == 5

    def test_list_stable_order(self, client):
        ids = [s["id"] for s in client.get("/samples").json()["items"]]
        assert ids == sorted(ids)

    def test_filter_author(self, client):
        doc = client.get("/samples", params={"author": "01"}).json()
        assert doc["total"] == 12  # all synth authors are 01 for n<=20
        doc = client.get("/samples", params={"author": "02"}).json()
        assert doc["total"] == 0

    def test_filter_status_empty(self, client):
        doc = client.get("/samples", params={"status": "rejected"}).json()
        assert doc["items"] == []

    def test_get_sample(self, client):
        sample_id = first_id(client)
        doc = client.get(f"/samples/{sample_id}").json()
        assert doc["id"] == sample_id
        assert doc["revision"] == 1
        assert doc["stages"] == ["raw"]

    def test_get_missing(self, client):
        assert client.get("/samples/a99_99").status_code == 404

    def test_raw_image(self, client):
        sample_id = first_id(client)
        resp = client.get(f"/samples/{sample_id}/image", params={"stage": "raw"})
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content[:4] == b"\x89PNG"

    def test_processed_image_missing(self, client):
        sample_id = first_id(client)
        resp = client.get(f"/samples/{sample_id}/image", params={"stage": "processed"})
        assert resp.status_code == 404

    def test_bad_stage(self, client):
        sample_id = first_id(client)
        assert client.get(f"/samples/{sample_id}/image", params={"stage": "x"}).status_code == 422


class TestPatch:
    def test_happy_path(self, client):
        sample_id = first_id(client)
        resp = client.patch(
            f"/samples/{sample_id}",
            json={"ground_truth": f"{ALAPH} {BETH}", "expected_revision": 1},
        )
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["revision"] == 2
        assert doc["ground_truth"] == f"{ALAPH} {BETH}"
        # read-your-writes
        assert client.get(f"/samples/{sample_id}").json()["revision"] == 2

    def test_stale_revision(self, client):
        sample_id = first_id(client)
        ok = client.patch(f"/samples/{sample_id}", json={"status": "clean", "expected_revision": 1})
        assert ok.status_code == 200
        stale = client.patch(f"/samples/{sample_id}", json={"status": "raw", "expected_revision": 1})
        assert stale.status_code == 409
        assert stale.json()["detail"]["current_revision"] == 2
        assert client.get(f"/samples/{sample_id}").json()["status"] == "clean"

    def test_charset_violation_position(self, client):
        sample_id = first_id(client)
        resp = client.patch(
            f"/samples/{sample_id}",
            json={"ground_truth": "A", "expected_revision": 1},
        )
        assert resp.status_code == 422
        violations = resp.json()["detail"]["violations"]
        assert violations == [{"position": 0, "codepoint": "U+0041"}]

    def test_force_overrides(self, client):
        sample_id = first_id(client)
        resp = client.patch(
            f"/samples/{sample_id}",
            json={"ground_truth": "A", "expected_revision": 1, "force": True},
        )
        assert resp.status_code == 200

    def test_no_fields(self, client):
        sample_id = first_id(client)
        resp = client.patch(f"/samples/{sample_id}", json={"expected_revision": 1})
        assert resp.status_code == 422

    def test_racing_patches_exactly_one_wins(self, client):
        sample_id = first_id(client)
        results = []
        barrier = threading.Barrier(2)

        def worker(status):
            barrier.wait()
            resp = client.patch(
                f"/samples/{sample_id}",
                json={"status": status, "expected_revision": 1},
            )
            results.append(resp.status_code)

        threads = [threading.Thread(target=worker, args=(s,)) for s in ("clean", "raw")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == [200, 409]
        assert client.get(f"/samples/{sample_id}").json()["revision"] == 2

    def test_gets_never_mutate(self, client):
        sample_id = first_id(client)
        before = client.get(f"/samples/{sample_id}").json()
        client.get("/samples")
        client.get(f"/samples/{sample_id}/image", params={"stage": "raw"})
        client.get("/healthz")
        assert client.get(f"/samples/{sample_id}").json() == before


class TestReprocess:
    def test_default_geometry(self, client):
        sample_id = first_id(client)
        resp = client.post(f"/samples/{sample_id}/reprocess", json={})
        assert resp.status_code == 200
        doc = resp.json()
        assert (doc["width"], doc["height"]) == (1200, 110)
        assert doc["revision"] == 2
        image = client.get(f"/samples/{sample_id}/image", params={"stage": "processed"})
        assert image.status_code == 200

    def test_threshold_zero_low_contrast(self, client, root):
        # emulate a typical scan: gray strokes, nothing at pure black,
        # so T=0 binarizes everything to one side
        import numpy as np

        from scribebench.imaging import Raster, save_png

        sample_id = first_id(client)
        rng = np.random.default_rng(0)
        gray = rng.integers(90, 220, (64, 400), dtype=np.uint8)
        save_png(Raster(gray), root / f"{sample_id}.png")
        doc = client.post(
            f"/samples/{sample_id}/reprocess", json={"threshold": 0}
        ).json()
        assert doc["low_contrast"] is True

    def test_deterministic_bytes(self, client):
        sample_id = first_id(client)
        client.post(f"/samples/{sample_id}/reprocess", json={"blur_k": 3})
        first = client.get(f"/samples/{sample_id}/image", params={"stage": "processed"}).content
        client.post(f"/samples/{sample_id}/reprocess", json={"blur_k": 3})
        second = client.get(f"/samples/{sample_id}/image", params={"stage": "processed"}).content
        assert first == second

    def test_bad_params(self, client):
        sample_id = first_id(client)
        assert (
            client.post(f"/samples/{sample_id}/reprocess", json={"threshold": 300}).status_code
            == 422
        )
        assert (
            client.post(f"/samples/{sample_id}/reprocess", json={"blur_k": 0}).status_code
            == 422
        )

    def test_missing_sample(self, client):
        assert client.post("/samples/a99_99/reprocess", json={}).status_code == 404


class TestRecognize:
    def test_reference_engine_roundtrip(self, client):
        sample_id = first_id(client)
        client.post(f"/samples/{sample_id}/reprocess", json={"blur_k": 1})
        resp = client.post(f"/samples/{sample_id}/recognize", json={"engine": "reference"})
        assert resp.status_code == 200
        doc = resp.json()
        truth = client.get(f"/samples/{sample_id}").json()["ground_truth"]
        assert doc["hypothesis"] == truth
        assert doc["cer"] == 0.0
        counts = doc["alignment"]
        assert counts["S"] == counts["D"] == counts["I"] == 0
        assert counts["N"] == len(truth)
        assert all(op["op"] == "match" for op in counts["ops"])

    def test_requires_processed_stage(self, client):
        sample_id = first_id(client)
        resp = client.post(f"/samples/{sample_id}/recognize", json={"engine": "reference"})
        assert resp.status_code == 404

    def test_unknown_engine(self, client):
        sample_id = first_id(client)
        client.post(f"/samples/{sample_id}/reprocess", json={})
        resp = client.post(f"/samples/{sample_id}/recognize", json={"engine": "nope"})
        assert resp.status_code == 404

    def test_failing_external_engine_maps_502(self, client, root, tmp_path):
        script = tmp_path / "fail.py"
        script.write_text(
            textwrap.dedent(
                """\
                import sys
                sys.stderr.write("engine exploded")
                sys.exit(2)
                """
            )
        )
        handle = EngineHandle(
            kind="external", command=f"{sys.executable} {script} {{image}}", timeout=5.0
        )
        app = create_app(root, engines={"broken": handle})
        broken_client = TestClient(app)
        sample_id = first_id(broken_client)
        broken_client.post(f"/samples/{sample_id}/reprocess", json={})
        resp = broken_client.post(
            f"/samples/{sample_id}/recognize", json={"engine": "broken"}
        )
        assert resp.status_code == 502
        assert "engine exploded" in resp.json()["detail"]["stderr"]

    def test_empty_hypothesis_counts_as_deletions(self, client, root, tmp_path):
        script = tmp_path / "empty.py"
        script.write_text("pass\n")
        handle = EngineHandle(
            kind="external", command=f"{sys.executable} {script} {{image}}", timeout=5.0
        )
        app = create_app(root, engines={"empty": handle})
        c = TestClient(app)
        sample_id = first_id(c)
        c.post(f"/samples/{sample_id}/reprocess", json={})
        doc = c.post(f"/samples/{sample_id}/recognize", json={"engine": "empty"}).json()
        truth = c.get(f"/samples/{sample_id}").json()["ground_truth"]
        assert doc["hypothesis"] == ""
        assert doc["alignment"]["D"] == len(truth)
        assert doc["cer"] == pytest.approx(100.0)


class TestReports:
    def test_missing_report(self, client):
        assert client.get("/reports/nope").status_code == 404

    def test_stored_report_served(self, client, root):
        reports = root / "reports"
        reports.mkdir()
        (reports / "run1.json").write_text('{"engine_name": "x"}', encoding="utf-8")
        doc = client.get("/reports/run1").json()
        assert doc["engine_name"] == "x"

    def test_traversal_rejected(self, client):
        assert client.get("/reports/..%2Fmanifest").status_code == 404
