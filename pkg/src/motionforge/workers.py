"""Stage workers: claim -> process -> finish loops over the job store.

Each stage completion enqueues the next stage's work item, so a run is a
chain of per-stage rows rather than one mutating row; restarts are idempotent
because terminal rows are never reprocessed and expired leases return to the
pool. Retriable backend failures leave the item leased; it becomes claimable
again once the lease lapses.
"""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing
import time
from pathlib import Path

from . import features, media, shots, tracking
from .backends.client import HttpBackend
from .backends.gateway import Gateway
from .backends.protocol import CAPABILITIES, RequestMeta, RetriableBackendError
from .backends.queries import final_image_check
from .backends.synthetic import SyntheticBackends
from .config import Config
from .store import JobStore, WorkItem

log = logging.getLogger(__name__)

PIPELINE_STAGES = ("collect", "preprocess", "track", "feature")


def gateway_from_config(cfg: Config, data_root: Path) -> Gateway:
    if cfg.backends.mode == "synthetic":
        from .synth import SceneSpec, render

        scene_dir = Path(cfg.backends.scene_dir)
        scenes = {}
        for p in sorted(scene_dir.glob("*.json")):
            spec = SceneSpec.load(p)
            scenes[spec.scene_id] = render(spec)
        synth = SyntheticBackends(scenes, media_root=data_root)
        impls = {k: synth for k in CAPABILITIES}
    elif cfg.backends.mode == "http":
        impls = {}
        clients: dict[str, HttpBackend] = {}
        for cap in CAPABILITIES:
            url = cfg.backends.endpoints.get(cap) or cfg.backends.endpoints.get("default")
            if url:
                impls[cap] = clients.setdefault(url, HttpBackend(url, timeout=cfg.backends.timeout))
    else:
        raise ValueError(f"unknown backends.mode {cfg.backends.mode!r}")
    return Gateway(impls, retries=cfg.backends.retries, backoff=cfg.backends.backoff,
                   max_inflight=cfg.backends.max_inflight)


def seed_video(store: JobStore, video_id: str, category: str, metadata: dict | None = None):
    """Register one video for collection."""
    meta = {"video_id": video_id, **(metadata or {})}
    store.enqueue(WorkItem(id=f"collect:{video_id}", kind="video", stage="collect",
                           category=category, metadata=meta))


# -- per-stage processing ----------------------------------------------------

def stage_collect(store: JobStore, item: WorkItem, gateway: Gateway,
                  data_root: Path, cfg: Config) -> dict:
    video_id = item.metadata["video_id"]
    path = gateway.fetch_video(video_id, RequestMeta(video_id=video_id,
                                                     category=item.category),
                               data_root / "videos")
    store.enqueue_if_absent(WorkItem(id=f"preprocess:{video_id}", kind="video", stage="preprocess",
                           category=item.category, payload_path=str(path),
                           metadata={"video_id": video_id}))
    return {"payload_path": str(path)}


def stage_preprocess(store: JobStore, item: WorkItem, gateway: Gateway,
                     data_root: Path, cfg: Config) -> dict:
    video_id = item.metadata["video_id"]
    reader = media.VideoReader(item.payload_path)
    frames = reader.read_all()
    reader.close()
    clips = shots.split_and_filter(
        frames, source_fps=reader.fps, threshold=cfg.shot.threshold,
        min_len=cfg.shot.min_len, target_fps=cfg.shot.target_fps,
        still_eps=cfg.shot.still_eps)
    kept = dropped = 0
    for k, clip in enumerate(clips):
        score = shots.clip_semantic_score(
            clip, item.category, gateway, n_samples=cfg.semantic.n_samples,
            weight=cfg.semantic.weight, seed=cfg.semantic.seed, video_id=video_id)
        if score < cfg.semantic.threshold:
            dropped += 1
            log.info("clip %s[%d] dropped: semantic score %.3f", video_id, k, score)
            continue
        clip_id = f"{video_id}-c{k:02d}"
        clip_dir = data_root / "clips" / clip_id
        media.write_frame_dir(clip_dir, [f.image for f in clip.frames], clip.fps,
                              meta={"clip_id": clip_id, "video_id": video_id,
                                    "category": item.category})
        (clip_dir / "clip.json").write_text(json.dumps({
            "clip_id": clip_id, "video_id": video_id, "category": item.category,
            "source_frames": clip.source_frames, "fps": clip.fps,
            "semantic_score": score, "sample_seed": cfg.semantic.seed,
        }, indent=1))
        store.enqueue_if_absent(WorkItem(id=f"track:{clip_id}", kind="clip", stage="track",
                               category=item.category, payload_path=str(clip_dir),
                               metadata={"clip_id": clip_id, "video_id": video_id}))
        kept += 1
    return {"clips_kept": kept, "clips_dropped": dropped}


def _stable_pick(track_id: str, n: int, seed: int) -> int:
    digest = hashlib.sha256(f"{seed}:{track_id}".encode()).digest()
    return int.from_bytes(digest[:4], "little") % n


def stage_track(store: JobStore, item: WorkItem, gateway: Gateway,
                data_root: Path, cfg: Config) -> dict:
    clip_dir = Path(item.payload_path)
    info = json.loads((clip_dir / "clip.json").read_text())
    clip_id, video_id = info["clip_id"], info["video_id"]
    source_frames = info["source_frames"]
    reader = media.VideoReader(clip_dir)
    frames = [f.image for f in reader.frames()]
    reader.close()
    h, w = frames[0].shape[:2]

    tracks = tracking.iterative_track(
        frames, source_frames, video_id, clip_id, item.category, gateway,
        interval=cfg.track.interval, assoc_iou=cfg.track.assoc_iou,
        prompt_template=cfg.track.prompt_template)
    tracks = tracking.filter_overlaps(tracks, iou_thresh=cfg.track.overlap_iou)
    final_tracks = []
    for tr in tracks:
        tr = tracking.filter_low_res(tr, crop_size=cfg.crop.size)
        tr = tracking.filter_truncated(tr, (w, h), margin_frac=cfg.track.truncation_margin)
        tr = tracking.cut_inconsistent(tr, iou_thresh=cfg.track.inconsistent_iou)
        final_tracks.extend(tracking.temporal_postprocess(
            tr, frames, source_frames, video_id, gateway,
            min_len=cfg.track.min_len, max_len=cfg.track.max_len,
            max_gap=cfg.track.max_gap))

    saved = rejected = 0
    for tr in final_tracks:
        windows = tracking.compute_crop_windows(
            tr, area_ratio=cfg.crop.area_ratio,
            smooth_window=cfg.crop.smooth_window, crop_size=cfg.crop.size)
        rgb_crops, mask_crops = tracking.render_crops(tr, frames, windows)
        if cfg.track.final_check:
            pick = _stable_pick(tr.track_id, len(rgb_crops), cfg.track.check_seed)
            src = source_frames[tr.detections[pick].frame]
            ok = final_image_check(rgb_crops[pick], item.category, gateway,
                                   meta=RequestMeta(video_id=video_id, category=item.category,
                                                    frame_index=src, track_id=tr.track_id))
            if not ok:
                rejected += 1
                log.info("track %s rejected by final image check", tr.track_id)
                continue
        track_dir = data_root / "tracks" / tr.track_id
        tracking.save_track(track_dir, tr, windows, rgb_crops, mask_crops)
        store.enqueue_if_absent(WorkItem(id=f"feature:{tr.track_id}", kind="track", stage="feature",
                               category=item.category, payload_path=str(track_dir),
                               metadata={"track_id": tr.track_id, "clip_id": clip_id,
                                         "video_id": video_id}))
        saved += 1
    return {"tracks_saved": saved, "tracks_rejected": rejected}


def stage_feature(store: JobStore, item: WorkItem, gateway: Gateway,
                  data_root: Path, cfg: Config) -> dict:
    track_dir = Path(item.payload_path)
    clip_id = item.metadata["clip_id"]
    info = json.loads((data_root / "clips" / clip_id / "clip.json").read_text())
    fs = features.extract_features(
        track_dir, info["video_id"], item.category, info["source_frames"], gateway,
        morph_radius=cfg.feature.morph_radius, tau=cfg.feature.occlusion_tau,
        grid_patch=cfg.feature.grid_patch, with_feature_grids=cfg.feature.feature_grids)
    summary = {"mean_occlusion": fs.mean_occlusion, "mean_flow": fs.mean_flow,
               "temporal_roughness": fs.temporal_roughness}
    store.enqueue_if_absent(WorkItem(id=f"review:{item.metadata['track_id']}", kind="track",
                           stage="review", category=item.category,
                           payload_path=str(track_dir),
                           metadata={**item.metadata, **summary}))
    return summary


STAGE_FNS = {
    "collect": stage_collect,
    "preprocess": stage_preprocess,
    "track": stage_track,
    "feature": stage_feature,
}


# -- worker loop --------------------------------------------------------------

def worker_loop(db_path, stage: str, worker_id: str, gateway: Gateway,
                data_root: Path, cfg: Config, wait_for_drain: bool = True,
                poll: float = 0.05, max_seconds: float | None = None) -> int:
    """Claim and process items until the stage drains. Returns items processed."""
    store = JobStore(db_path)
    fn = STAGE_FNS[stage]
    done = 0
    start = time.monotonic()
    try:
        while True:
            if max_seconds is not None and time.monotonic() - start > max_seconds:
                break
            item = store.claim(stage, worker_id, lease_duration=cfg.store.lease_seconds)
            if item is None:
                if not wait_for_drain or store.pending(stage) == 0:
                    break
                time.sleep(poll)
                continue
            try:
                updates = fn(store, item, gateway, Path(data_root), cfg)
            except RetriableBackendError as exc:
                log.warning("%s %s: retriable failure (%s); leaving leased",
                            stage, item.id, exc)
                continue
            except Exception as exc:
                log.exception("%s %s failed; discarding", stage, item.id)
                store.finish(item.id, "discarded", worker_id, {"error": str(exc)})
                done += 1
                continue
            store.finish(item.id, "completed", worker_id, updates)
            done += 1
    finally:
        store.close()
    return done


def _worker_entry(db_path, stage, worker_id, data_root, cfg, max_seconds):
    logging.basicConfig(level=logging.INFO)
    gateway = gateway_from_config(cfg, Path(data_root))
    worker_loop(db_path, stage, worker_id, gateway, Path(data_root), cfg,
                max_seconds=max_seconds)


def run_stage(cfg: Config, stage: str, worker_count: int = 1,
              max_seconds: float | None = None) -> int:
    """Spawn worker processes for one stage and wait for the drain."""
    if stage not in STAGE_FNS:
        raise ValueError(f"unknown stage {stage!r}; choose from {sorted(STAGE_FNS)}")
    data_root = Path(cfg.store.data_root)
    data_root.mkdir(parents=True, exist_ok=True)
    db_path = cfg.store.db_path
    if worker_count <= 1:
        gateway = gateway_from_config(cfg, data_root)
        return worker_loop(db_path, stage, "w0", gateway, data_root, cfg,
                           max_seconds=max_seconds)
    ctx = multiprocessing.get_context("spawn")
    procs = [
        ctx.Process(target=_worker_entry,
                    args=(db_path, stage, f"w{i}", str(data_root), cfg, max_seconds))
        for i in range(worker_count)
    ]
    for p in procs:
        p.start()
    for p in procs:
        p.join()
    failed = [p.exitcode for p in procs if p.exitcode != 0]
    if failed:
        raise RuntimeError(f"worker exit codes: {failed}")
    store = JobStore(db_path)
    try:
        return len(store.query(stage=stage, status="completed"))
    finally:
        store.close()
