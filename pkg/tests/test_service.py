import shutil

import numpy as np
import pytest
from fastapi.testclient import TestClient

from motionforge import benchmark
from motionforge.service import REVIEW_CRITERIA, accepted_records, build_review_app
from motionforge.store import JobStore

CRITERIA_ALL_TRUE = {k: True for k in REVIEW_CRITERIA}


@pytest.fixture(scope="module")
def review_env(tmp_path_factory, corpus_scenes):
    """A pipeline run copied into a module-local dir (tests mutate state)."""
    from conftest import run_full_pipeline

    src = tmp_path_factory.mktemp("svc") / "data"
    cfg = run_full_pipeline(src, corpus_scenes)
    return cfg


@pytest.fixture()
def client(review_env):
    return TestClient(build_review_app(review_env))


def fresh_env(tmp_path, review_env):
    """Clone the shared run so decision tests do not interfere."""
    from motionforge.config import Config

    src_root = review_env.store.data_root
    dst_root = tmp_path / "data"
    shutil.copytree(src_root, dst_root)
    cfg = Config(**{**review_env.__dict__})
    cfg.store = type(review_env.store)(data_root=str(dst_root),
                                       lease_seconds=review_env.store.lease_seconds)
    store = JobStore(cfg.store.db_path)
    for it in store.query(stage="review"):
        store.update_metadata(it.id, {})
        # payload paths moved with the copy
        store._conn.execute("UPDATE items SET payload_path = replace(payload_path, ?, ?)",
                            (str(src_root), str(dst_root)))
    store.close()
    return cfg


class TestQueue:
    def test_queue_sorted_by_roughness_desc(self, client):
        rows = client.get("/api/review/queue").json()["pending"]
        assert len(rows) == 17
        rough = [r["temporal_roughness"] for r in rows]
        assert rough == sorted(rough, reverse=True)

    def test_queue_rows_carry_summary_stats(self, client):
        rows = client.get("/api/review/queue").json()["pending"]
        for r in rows:
            assert r["n_frames"] > 0
            assert r["mean_flow"] is not None
            assert r["mean_occlusion"] is not None


class TestMedia:
    def test_rgb_frame_with_count_header(self, client):
        rows = client.get("/api/review/queue").json()["pending"]
        tid = rows[0]["track_id"]
        resp = client.get(f"/api/review/{tid}/media/rgb", params={"frame": 0})
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert int(resp.headers["X-Frame-Count"]) == rows[0]["n_frames"]

    def test_masked_overlay_tints_only_foreground(self, client, review_env, corpus_scenes):
        import cv2

        tid = "s01_clean_single-c00-t00"
        raw = client.get(f"/api/review/{tid}/media/rgb", params={"frame": 5}).content
        tinted = client.get(f"/api/review/{tid}/media/masked", params={"frame": 5}).content
        a = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_COLOR)
        b = cv2.imdecode(np.frombuffer(tinted, np.uint8), cv2.IMREAD_COLOR)
        from pathlib import Path

        from motionforge.geometry import Mask

        track_dir = Path(review_env.store.data_root) / "tracks" / tid
        frames = sorted(int(p.stem) for p in (track_dir / "rgb").glob("*.png"))
        mask = Mask.load_png(track_dir / "mask" / f"{frames[5]:06d}.png").bits.astype(bool)
        assert np.array_equal(a[~mask], b[~mask])  # background untouched
        assert not np.array_equal(a[mask], b[mask])  # foreground tinted

    def test_keypoint_overlay_differs_from_rgb(self, client):
        tid = "s12_quadruped-c00-t00"
        raw = client.get(f"/api/review/{tid}/media/rgb", params={"frame": 0}).content
        kp = client.get(f"/api/review/{tid}/media/keypoints", params={"frame": 0}).content
        assert raw != kp

    def test_unknown_kind_and_frame_404(self, client):
        tid = "s01_clean_single-c00-t00"
        assert client.get(f"/api/review/{tid}/media/bogus").status_code == 404
        assert client.get(f"/api/review/{tid}/media/rgb",
                          params={"frame": 10_000}).status_code == 404
        assert client.get("/api/review/ghost/media/rgb").status_code == 404


class TestDecisions:
    def test_accept_persists_criteria_and_transitions(self, tmp_path, review_env):
        cfg = fresh_env(tmp_path, review_env)
        client = TestClient(build_review_app(cfg))
        tid = "s01_clean_single-c00-t00"
        resp = client.post(f"/api/review/{tid}", json={
            "decision": "accept", "criteria": CRITERIA_ALL_TRUE, "reviewer": "alice"})
        assert resp.status_code == 200
        store = JobStore(cfg.store.db_path)
        item = store.get(f"review:{tid}")
        assert item.status == "completed"
        assert item.metadata["decision"] == "accept"
        assert item.metadata["criteria"] == CRITERIA_ALL_TRUE
        audit = store.reviews_for(tid)
        assert len(audit) == 1 and audit[0]["reviewer"] == "alice"
        store.close()

    def test_double_decision_conflicts(self, tmp_path, review_env):
        cfg = fresh_env(tmp_path, review_env)
        client = TestClient(build_review_app(cfg))
        tid = "s02_two_actors-c00-t00"
        body = {"decision": "accept", "criteria": CRITERIA_ALL_TRUE}
        assert client.post(f"/api/review/{tid}", json=body).status_code == 200
        assert client.post(f"/api/review/{tid}", json=body).status_code == 409

    def test_reject_with_partial_criteria_recorded(self, tmp_path, review_env):
        cfg = fresh_env(tmp_path, review_env)
        client = TestClient(build_review_app(cfg))
        tid = "s10_fade_teleport-c00-t00"
        criteria = {**CRITERIA_ALL_TRUE, "smooth_body_motion": False}
        resp = client.post(f"/api/review/{tid}", json={"decision": "reject",
                                                       "criteria": criteria})
        assert resp.status_code == 200
        store = JobStore(cfg.store.db_path)
        item = store.get(f"review:{tid}")
        assert item.status == "discarded"
        assert item.metadata["criteria"]["smooth_body_motion"] is False
        store.close()

    def test_malformed_criteria_rejected(self, tmp_path, review_env):
        cfg = fresh_env(tmp_path, review_env)
        client = TestClient(build_review_app(cfg))
        tid = "s05_low_res-c00-t00"
        assert client.post(f"/api/review/{tid}", json={
            "decision": "accept", "criteria": {"nope": True}}).status_code == 422
        assert client.post(f"/api/review/{tid}", json={
            "decision": "maybe", "criteria": CRITERIA_ALL_TRUE}).status_code == 422

    def test_queue_shrinks_after_decisions(self, tmp_path, review_env):
        cfg = fresh_env(tmp_path, review_env)
        client = TestClient(build_review_app(cfg))
        before = len(client.get("/api/review/queue").json()["pending"])
        for tid in ("s01_clean_single-c00-t00", "s12_quadruped-c00-t00",
                    "s05_low_res-c00-t00"):
            client.post(f"/api/review/{tid}", json={"decision": "accept",
                                                    "criteria": CRITERIA_ALL_TRUE})
        after = len(client.get("/api/review/queue").json()["pending"])
        assert after == before - 3
        stats = client.get("/api/stats").json()
        assert stats["review"]["accepted"] == 3
        assert stats["review"]["pending"] == after


class TestExport:
    def test_accepted_records_and_export_cap(self, tmp_path, review_env):
        cfg = fresh_env(tmp_path, review_env)
        client = TestClient(build_review_app(cfg))
        tids = [r["track_id"] for r in client.get("/api/review/queue").json()["pending"]]
        for tid in tids:
            client.post(f"/api/review/{tid}", json={"decision": "accept",
                                                    "criteria": CRITERIA_ALL_TRUE})
        store = JobStore(cfg.store.db_path)
        records = accepted_records(store)
        store.close()
        assert len(records) == len(tids)
        out = tmp_path / "bench"
        manifest = benchmark.export_benchmark(records, out, crop_size=cfg.crop.size,
                                              per_category_cap=10)
        assert len(manifest.sequences) == 10  # 17 accepted, one category, capped
        reloaded = benchmark.load_manifest(out / "manifest.json")
        assert benchmark.manifest_missing_files(reloaded) == []
        assert reloaded.to_dict() == manifest.to_dict()

    def test_export_nothing_accepted_errors(self, tmp_path):
        with pytest.raises(ValueError):
            benchmark.export_benchmark([], tmp_path / "x", crop_size=64)
