"""Stage 3: iterative ground-and-track, the filter passes, temporal
postprocessing and object-centric cropping.

Filters run in a fixed order (overlap, low-res, truncated, inconsistent,
temporal, crop); every removal is recorded in the track's provenance so the
history of a track is reconstructable.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import media
from .backends.gateway import Gateway
from .backends.protocol import BackendError, RequestMeta, SegmentPrompt
from .geometry import BBox, Mask, bbox_iou, mask_iou

log = logging.getLogger(__name__)

DEFAULT_TRACK_INTERVAL = 50
DEFAULT_OVERLAP_IOU = 0.1
DEFAULT_INCONSISTENT_IOU = 0.3
DEFAULT_TRUNCATION_MARGIN = 0.02
DEFAULT_ASSOC_IOU = 0.3
DEFAULT_MIN_LEN = 30
DEFAULT_MAX_LEN = 500
DEFAULT_MAX_GAP = 5
DEFAULT_CROP_AREA_RATIO = 2.0
DEFAULT_SMOOTH_WINDOW = 10
DEFAULT_CROP_SIZE = 512


@dataclass
class TrackDetection:
    frame: int  # clip-frame index
    box: BBox
    mask: Mask


@dataclass
class Track:
    track_id: str
    clip_id: str
    detections: list[TrackDetection] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def frames(self) -> list[int]:
        return [d.frame for d in self.detections]

    def __len__(self) -> int:
        return len(self.detections)


@dataclass
class CropWindow:
    frame: int
    center: tuple[float, float]  # smoothed
    side: float  # smoothed, pre-rounding
    rect: tuple[int, int, int]  # x0, y0, side_px actually sampled
    out_size: int

    def to_dict(self) -> dict:
        return {"frame": self.frame, "center": list(self.center), "side": self.side,
                "rect": list(self.rect), "out_size": self.out_size}

    @classmethod
    def from_dict(cls, d) -> "CropWindow":
        return cls(frame=d["frame"], center=tuple(d["center"]), side=d["side"],
                   rect=tuple(d["rect"]), out_size=d["out_size"])


# -- iterative grounding and tracking ------------------------------------

def iterative_track(frames: list[np.ndarray], source_frames: list[int],
                    video_id: str, clip_id: str, category: str, gateway: Gateway,
                    interval: int = DEFAULT_TRACK_INTERVAL,
                    assoc_iou: float = DEFAULT_ASSOC_IOU,
                    prompt_template: str = "{category}") -> list[Track]:
    """Detect on the first frame of each interval, track through it, and link
    instances across interval boundaries by greedy best mask-IoU."""
    n = len(frames)
    prompt = prompt_template.format(category=category)
    tracks: dict[str, list[TrackDetection]] = {}
    last_mask: dict[str, tuple[int, Mask]] = {}  # global id -> (frame, mask at it)
    next_id = 0

    for start in range(0, n, interval):
        end = min(start + interval, n)
        det_meta = RequestMeta(video_id=video_id, clip_id=clip_id, category=category,
                               frame_index=source_frames[start])
        detections = gateway.detect(frames[start], prompt, det_meta)
        if not detections:
            last_mask = {}
            continue
        prompts = [SegmentPrompt(frame=0, instance=f"i{k}", box=d.box)
                   for k, d in enumerate(detections)]
        seg_meta = RequestMeta(video_id=video_id, clip_id=clip_id, category=category,
                               frame_indices=source_frames[start:end])
        masks = gateway.segment_track(frames[start:end], prompts, seg_meta)

        # greedy best-IoU association against track masks at frame start-1
        candidates = []
        eligible = {g: m for g, (f, m) in last_mask.items() if f == start - 1}
        for inst in sorted(masks):
            first = masks[inst][0]
            if first.is_empty():
                continue
            for g, m in eligible.items():
                iou = mask_iou(first, m)
                if iou >= assoc_iou:
                    candidates.append((iou, inst, g))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        assignment: dict[str, str] = {}
        taken = set()
        for iou, inst, g in candidates:
            if inst in assignment or g in taken:
                continue
            assignment[inst] = g
            taken.add(g)

        last_mask = {}
        for inst in sorted(masks):
            per = masks[inst]
            if all(per[i].is_empty() for i in per):
                continue
            gid = assignment.get(inst)
            if gid is None:
                gid = f"{clip_id}-t{next_id:02d}"
                next_id += 1
                tracks[gid] = []
            for local in range(end - start):
                m = per[local]
                if m.is_empty():
                    continue
                tracks[gid].append(TrackDetection(frame=start + local,
                                                  box=m.tight_bbox(), mask=m))
            last_mask[gid] = (end - 1, per[end - start - 1])

    out = []
    for gid in sorted(tracks):
        dets = sorted(tracks[gid], key=lambda d: d.frame)
        out.append(Track(track_id=gid, clip_id=clip_id, detections=dets,
                         provenance={"filters": {}}))
    return out


# -- filter passes --------------------------------------------------------

def filter_overlaps(tracks: list[Track], iou_thresh: float = DEFAULT_OVERLAP_IOU) -> list[Track]:
    """Remove a frame from BOTH tracks of any pair whose masks overlap past
    the threshold (every track in a violating pair loses the frame)."""
    by_frame: dict[int, list[tuple[int, TrackDetection]]] = {}
    for ti, tr in enumerate(tracks):
        for det in tr.detections:
            by_frame.setdefault(det.frame, []).append((ti, det))
    to_remove: dict[int, set[int]] = {ti: set() for ti in range(len(tracks))}
    for frame, entries in by_frame.items():
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                ti, di = entries[i]
                tj, dj = entries[j]
                if mask_iou(di.mask, dj.mask) > iou_thresh:
                    to_remove[ti].add(frame)
                    to_remove[tj].add(frame)
    out = []
    for ti, tr in enumerate(tracks):
        removed = sorted(to_remove[ti])
        dets = [d for d in tr.detections if d.frame not in to_remove[ti]]
        prov = dict(tr.provenance)
        prov.setdefault("filters", {})["overlap_removed"] = removed
        out.append(Track(tr.track_id, tr.clip_id, dets, prov))
    return out


def filter_low_res(track: Track, crop_size: int = DEFAULT_CROP_SIZE) -> Track:
    """Drop frames whose bbox area is below a quarter of the crop area."""
    floor = (crop_size * crop_size) / 4.0
    kept, removed = [], []
    for d in track.detections:
        (kept if d.box.area >= floor else removed).append(d)
    prov = dict(track.provenance)
    prov.setdefault("filters", {})["low_res_removed"] = [d.frame for d in removed]
    return Track(track.track_id, track.clip_id, kept, prov)


def filter_truncated(track: Track, frame_dims: tuple[int, int],
                     margin_frac: float = DEFAULT_TRUNCATION_MARGIN) -> Track:
    """Drop frames whose bbox edge is within the margin of the frame border."""
    w, h = frame_dims
    margin = margin_frac * min(w, h)
    kept, removed = [], []
    for d in track.detections:
        b = d.box
        truncated = (b.x_min < margin or b.y_min < margin
                     or b.x_max > w - margin or b.y_max > h - margin)
        (removed if truncated else kept).append(d)
    prov = dict(track.provenance)
    prov.setdefault("filters", {})["truncated_removed"] = [d.frame for d in removed]
    return Track(track.track_id, track.clip_id, kept, prov)


def cut_inconsistent(track: Track, iou_thresh: float = DEFAULT_INCONSISTENT_IOU) -> Track:
    """Truncate at the first adjacent pair with low box IoU: the second frame
    of the pair and everything after it is dropped."""
    dets = track.detections
    cut_at = None
    for i in range(len(dets) - 1):
        if bbox_iou(dets[i].box, dets[i + 1].box) < iou_thresh:
            cut_at = i + 1
            break
    prov = dict(track.provenance)
    if cut_at is None:
        prov.setdefault("filters", {})["inconsistent_truncated_at"] = None
        return Track(track.track_id, track.clip_id, dets, prov)
    prov.setdefault("filters", {})["inconsistent_truncated_at"] = dets[cut_at].frame
    return Track(track.track_id, track.clip_id, dets[:cut_at], prov)


# -- temporal postprocessing ----------------------------------------------

def _interpolate_box(a: BBox, b: BBox, frac: float) -> BBox:
    av, bv = a.to_list(), b.to_list()
    return BBox.from_list([x * (1 - frac) + y * frac for x, y in zip(av, bv)])


def _refill_gap(prev: TrackDetection, nxt: TrackDetection, frames, source_frames,
                video_id, clip_id, gateway: Gateway) -> list[TrackDetection] | None:
    """Resegment the missing frames, prompting with interpolated boxes.
    None signals failure and the caller splits the track instead."""
    first, last = prev.frame + 1, nxt.frame - 1
    span = nxt.frame - prev.frame
    local_frames = [frames[f] for f in range(first, last + 1)]
    prompts = []
    boxes = []
    for k, f in enumerate(range(first, last + 1)):
        box = _interpolate_box(prev.box, nxt.box, (f - prev.frame) / span)
        boxes.append(box)
        prompts.append(SegmentPrompt(frame=k, instance="gap", box=box))
    meta = RequestMeta(video_id=video_id, clip_id=clip_id,
                       frame_indices=[source_frames[f] for f in range(first, last + 1)])
    try:
        masks = gateway.segment_track(local_frames, prompts, meta)["gap"]
    except BackendError as exc:
        log.warning("gap refill %d..%d failed (%s); splitting", first, last, exc)
        return None
    out = []
    for k, f in enumerate(range(first, last + 1)):
        m = masks[k]
        if m.is_empty():
            return None
        out.append(TrackDetection(frame=f, box=m.tight_bbox(), mask=m))
    return out


def temporal_postprocess(track: Track, frames, source_frames, video_id: str,
                         gateway: Gateway, min_len: int = DEFAULT_MIN_LEN,
                         max_len: int = DEFAULT_MAX_LEN,
                         max_gap: int = DEFAULT_MAX_GAP) -> list[Track]:
    """Split on long gaps and max-length, refill short gaps by resegmentation,
    then discard fragments below the minimum length."""
    segments: list[list[TrackDetection]] = []
    refilled: list[int] = []
    cur: list[TrackDetection] = []

    def push(det: TrackDetection):
        nonlocal cur
        cur.append(det)
        if len(cur) >= max_len:
            segments.append(cur)
            cur = []

    for det in track.detections:
        if cur:
            gap = det.frame - cur[-1].frame - 1
            if gap > max_gap:
                segments.append(cur)
                cur = []
            elif gap > 0:
                filled = _refill_gap(cur[-1], det, frames, source_frames,
                                     video_id, track.clip_id, gateway)
                if filled is None:
                    segments.append(cur)
                    cur = []
                else:
                    for fd in filled:
                        refilled.append(fd.frame)
                        push(fd)
        push(det)
    if cur:
        segments.append(cur)

    out: list[Track] = []
    kept_idx = 0
    for seg in segments:
        if len(seg) < min_len:
            log.debug("fragment of %d < min_len %d discarded (track %s)",
                      len(seg), min_len, track.track_id)
            continue
        tid = track.track_id if kept_idx == 0 else f"{track.track_id}.{kept_idx}"
        prov = json.loads(json.dumps(track.provenance))
        prov.setdefault("filters", {})["refilled"] = [f for f in refilled
                                                      if seg[0].frame <= f <= seg[-1].frame]
        prov["segment_of"] = track.track_id
        out.append(Track(tid, track.clip_id, seg, prov))
        kept_idx += 1
    return out


# -- object-centric cropping ----------------------------------------------

def raw_crop_geometry(track: Track, area_ratio: float = DEFAULT_CROP_AREA_RATIO):
    """Per-frame crop center and side before smoothing."""
    centers = np.array([d.box.center for d in track.detections], dtype=np.float64)
    sides = np.array([math.sqrt(area_ratio * d.box.area) for d in track.detections])
    return centers, sides


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average truncated at the ends. For even windows the
    extra tap goes forward: indices [i-(w-1)//2, i+w//2]."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    back, fwd = (window - 1) // 2, window // 2
    out = np.empty_like(v)
    for i in range(n):
        lo, hi = max(0, i - back), min(n, i + fwd + 1)
        out[i] = v[lo:hi].mean(axis=0)
    return out


def compute_crop_windows(track: Track, area_ratio: float = DEFAULT_CROP_AREA_RATIO,
                         smooth_window: int = DEFAULT_SMOOTH_WINDOW,
                         crop_size: int = DEFAULT_CROP_SIZE) -> list[CropWindow]:
    if not track.detections:
        return []
    centers, sides = raw_crop_geometry(track, area_ratio)
    cxs = moving_average(centers[:, 0], smooth_window)
    cys = moving_average(centers[:, 1], smooth_window)
    ss = moving_average(sides, smooth_window)
    windows = []
    for det, cx, cy, side in zip(track.detections, cxs, cys, ss):
        side_px = max(1, int(round(side)))
        x0 = int(round(cx - side / 2.0))
        y0 = int(round(cy - side / 2.0))
        windows.append(CropWindow(frame=det.frame, center=(float(cx), float(cy)),
                                  side=float(side), rect=(x0, y0, side_px),
                                  out_size=crop_size))
    return windows


def extract_crop(image: np.ndarray, window: CropWindow) -> tuple[np.ndarray, bool]:
    """Square crop resized to out_size; out-of-frame area padded black.
    Returns (crop, clamped_flag)."""
    x0, y0, side = window.rect
    h, w = image.shape[:2]
    canvas_shape = (side, side, 3) if image.ndim == 3 else (side, side)
    canvas = np.zeros(canvas_shape, dtype=image.dtype)
    sx0, sy0 = max(0, x0), max(0, y0)
    sx1, sy1 = min(w, x0 + side), min(h, y0 + side)
    clamped = (sx0 != x0 or sy0 != y0 or sx1 != x0 + side or sy1 != y0 + side)
    if sx1 > sx0 and sy1 > sy0:
        canvas[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = image[sy0:sy1, sx0:sx1]
    if image.ndim == 3:
        return media.resize_rgb(canvas, window.out_size), clamped
    return media.resize_mask(canvas, window.out_size), clamped


def uncrop_mask(crop_bits: np.ndarray, window: CropWindow,
                frame_h: int, frame_w: int) -> Mask:
    """Map a crop-space mask back to full-frame space through the window."""
    x0, y0, side = window.rect
    back = media.resize_mask(crop_bits.astype(np.uint8), side) if side != crop_bits.shape[0] \
        else crop_bits.astype(np.uint8)
    full = np.zeros((frame_h, frame_w), dtype=np.uint8)
    sx0, sy0 = max(0, x0), max(0, y0)
    sx1, sy1 = min(frame_w, x0 + side), min(frame_h, y0 + side)
    if sx1 > sx0 and sy1 > sy0:
        full[sy0:sy1, sx0:sx1] = back[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0]
    return Mask(full)


def render_crops(track: Track, frames: list[np.ndarray],
                 windows: list[CropWindow]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Cropped RGB and mask media, plus clamped-frame provenance on the track."""
    rgb_out, mask_out, clamped_frames = [], [], []
    for det, win in zip(track.detections, windows):
        crop, clamped = extract_crop(frames[det.frame], win)
        mcrop, _ = extract_crop(det.mask.bits, win)
        rgb_out.append(crop)
        mask_out.append(mcrop)
        if clamped:
            clamped_frames.append(det.frame)
    track.provenance.setdefault("filters", {})["crop_clamped"] = clamped_frames
    return rgb_out, mask_out


# -- persistence -----------------------------------------------------------

def save_track(track_dir, track: Track, windows: list[CropWindow],
               rgb_crops: list[np.ndarray], mask_crops: list[np.ndarray]) -> Path:
    """Track layout: rgb/%06d.png, mask/%06d.png, crop_windows.json,
    provenance.json (filenames keyed by clip-frame index)."""
    track_dir = Path(track_dir)
    (track_dir / "rgb").mkdir(parents=True, exist_ok=True)
    (track_dir / "mask").mkdir(parents=True, exist_ok=True)
    for det, win, rgb, mbits in zip(track.detections, windows, rgb_crops, mask_crops):
        media.write_png(track_dir / "rgb" / f"{det.frame:06d}.png", rgb)
        Mask(mbits).save_png(track_dir / "mask" / f"{det.frame:06d}.png")
    (track_dir / "crop_windows.json").write_text(json.dumps({
        "out_size": windows[0].out_size if windows else None,
        "windows": [w.to_dict() for w in windows],
    }, indent=1))
    (track_dir / "provenance.json").write_text(json.dumps({
        "track_id": track.track_id, "clip_id": track.clip_id,
        "frames": track.frames, **track.provenance,
    }, indent=1))
    return track_dir


def load_crop_windows(track_dir) -> list[CropWindow]:
    data = json.loads((Path(track_dir) / "crop_windows.json").read_text())
    return [CropWindow.from_dict(d) for d in data["windows"]]
