"""Review service backing the curation UI: queue, server-rendered overlay
media, decision posts, and progress stats. Decisions go through the store's
compare-and-set, so concurrent reviewers cannot double-decide a track."""

from __future__ import annotations

import io
import json
import logging
from pathlib import Path

import cv2
import numpy as np
from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import media
from .config import Config
from .geometry import DEFAULT_SKELETON, Keypoints, Mask
from .store import JobStore

log = logging.getLogger(__name__)

REVIEW_CRITERIA = (
    "no_heavy_occlusion",
    "smooth_body_motion",
    "smooth_camera_motion",
    "mask_complete",
    "keypoints_accurate",
)

MEDIA_KINDS = ("rgb", "masked", "keypoints")
MASK_TINT = np.array([0, 220, 90], dtype=np.float64)
MASK_ALPHA = 0.45


def render_overlay(kind: str, rgb: np.ndarray, mask: Mask | None,
                   kps: Keypoints | None, skeleton: dict | None = None) -> np.ndarray:
    if kind == "rgb":
        return rgb
    if kind == "masked":
        out = rgb.astype(np.float64)
        fg = mask.bits.astype(bool)
        out[fg] = out[fg] * (1 - MASK_ALPHA) + MASK_TINT * MASK_ALPHA
        return out.astype(np.uint8)
    if kind == "keypoints":
        out = rgb.copy()
        edges = (skeleton or DEFAULT_SKELETON).get("edges", [])
        pts = kps.xy.astype(int)
        if kps.count == len((skeleton or DEFAULT_SKELETON).get("joints", [])):
            for a, b in edges:
                cv2.line(out, tuple(pts[a]), tuple(pts[b]), (250, 220, 40), 1)
        for (x, y), conf in zip(pts, kps.confidence):
            color = (230, 40, 40) if conf >= 0.3 else (120, 120, 120)
            cv2.circle(out, (int(x), int(y)), 2, color, -1)
        return out
    raise ValueError(f"unknown media kind {kind!r}")


def _track_frames(track_dir: Path) -> list[int]:
    return sorted(int(p.stem) for p in (track_dir / "rgb").glob("*.png"))


def build_review_app(cfg: Config) -> FastAPI:
    app = FastAPI(title="motionforge review service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    db_path = cfg.store.db_path

    def open_store() -> JobStore:
        return JobStore(db_path)

    @app.get("/api/review/queue")
    def queue():
        store = open_store()
        try:
            items = store.query(stage="review", status="unprocessed")
        finally:
            store.close()
        rows = [
            {
                "track_id": it.metadata.get("track_id", it.id),
                "category": it.category,
                "temporal_roughness": it.metadata.get("temporal_roughness", 0.0),
                "mean_flow": it.metadata.get("mean_flow"),
                "mean_occlusion": it.metadata.get("mean_occlusion"),
                "n_frames": len(_track_frames(Path(it.payload_path))),
            }
            for it in items
        ]
        rows.sort(key=lambda r: (-r["temporal_roughness"], r["track_id"]))
        return {"pending": rows}

    def _find_item(store: JobStore, track_id: str):
        matches = store.query(stage="review",
                              metadata_predicate=lambda m: m.get("track_id") == track_id)
        return matches[0] if matches else None

    @app.get("/api/review/{track_id}/media/{kind}")
    def media_frame(track_id: str, kind: str, frame: int = 0):
        if kind not in MEDIA_KINDS:
            return JSONResponse({"error": f"unknown media kind {kind!r}"}, status_code=404)
        store = open_store()
        try:
            item = _find_item(store, track_id)
        finally:
            store.close()
        if item is None:
            return JSONResponse({"error": f"unknown track {track_id!r}"}, status_code=404)
        track_dir = Path(item.payload_path)
        frames = _track_frames(track_dir)
        if not (0 <= frame < len(frames)):
            return JSONResponse({"error": f"frame {frame} outside 0..{len(frames) - 1}"},
                                status_code=404)
        f = frames[frame]
        rgb = media.read_png(track_dir / "rgb" / f"{f:06d}.png")
        mask = kps = None
        if kind == "masked":
            mask = Mask.load_png(track_dir / "mask" / f"{f:06d}.png")
        if kind == "keypoints":
            kps = Keypoints.load(track_dir / "features" / "kp" / f"{f:06d}.json")
        out = render_overlay(kind, rgb, mask, kps)
        ok, buf = cv2.imencode(".png", cv2.cvtColor(out, cv2.COLOR_RGB2BGR))
        return Response(content=buf.tobytes(), media_type="image/png",
                        headers={"X-Frame-Count": str(len(frames)),
                                 "X-Frame-Index": str(frame)})

    @app.post("/api/review/{track_id}")
    async def decide(track_id: str, body: dict):
        decision = body.get("decision")
        if decision not in ("accept", "reject"):
            return JSONResponse({"error": "decision must be accept or reject"},
                                status_code=422)
        criteria = body.get("criteria") or {}
        if set(criteria) != set(REVIEW_CRITERIA) or not all(
                isinstance(v, bool) for v in criteria.values()):
            return JSONResponse(
                {"error": f"criteria must be booleans for {sorted(REVIEW_CRITERIA)}"},
                status_code=422)
        store = open_store()
        try:
            item = _find_item(store, track_id)
            if item is None:
                return JSONResponse({"error": f"unknown track {track_id!r}"}, status_code=404)
            to_status = "completed" if decision == "accept" else "discarded"
            ok = store.transition(item.id, "unprocessed", to_status, {
                "decision": decision, "criteria": criteria,
                "reviewer": body.get("reviewer"), "decided_at": store.now(),
            })
            if not ok:
                return JSONResponse({"error": f"track {track_id!r} already decided"},
                                    status_code=409)
            store.record_review(track_id, decision, criteria, body.get("reviewer"))
        finally:
            store.close()
        return {"track_id": track_id, "decision": decision}

    @app.get("/api/stats")
    def stats():
        store = open_store()
        try:
            counts = store.counts()
        finally:
            store.close()
        review = counts.get("review", {})
        return {
            "stages": counts,
            "review": {
                "pending": review.get("unprocessed", 0) + review.get("processing", 0),
                "accepted": review.get("completed", 0),
                "rejected": review.get("discarded", 0),
            },
        }

    return app


def accepted_records(store: JobStore) -> list[dict]:
    """Accepted review items in decision order, for benchmark export."""
    items = store.query(stage="review", status="completed",
                        metadata_predicate=lambda m: m.get("decision") == "accept")
    return [
        {"track_id": it.metadata["track_id"], "category": it.category,
         "track_dir": it.payload_path,
         "accepted_at": it.metadata.get("decided_at", 0.0)}
        for it in items
    ]
