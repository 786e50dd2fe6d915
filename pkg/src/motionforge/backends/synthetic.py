"""Deterministic in-process backends answering from synthetic scene GT.

Each call is a pure function of (scene spec, request): the request meta
carries video id, source-frame indices and crop rects, which is exactly the
provenance the pipeline attaches to every call anyway. Scripted noise
(box jitter, detection dropout, identity swaps) exercises the filter passes.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

from ..geometry import BBox, Keypoints, Mask, bbox_iou
from ..synth import NoiseSpec, Rendered, write_scene_video
from .protocol import BackendContractError, Detection, RequestMeta, SegmentPrompt, VideoPayload

EMBED_DIM = 32
FEATURE_DIM = 8


def _unit_vector_for(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    digest = hashlib.sha256(text.encode()).digest()
    rng = np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _orthogonal_to(v: np.ndarray) -> np.ndarray:
    w = _unit_vector_for("orthogonal-basis", v.shape[0])
    w = w - float(w @ v) * v
    return w / np.linalg.norm(w)


def crop_sample_indices(rect, out_size: int, height: int, width: int):
    """Integer source indices for sampling a square crop rect at out_size.

    rect = [x0, y0, side, ...]; samples at the center of each output cell.
    """
    x0, y0, side = float(rect[0]), float(rect[1]), float(rect[2])
    scale = side / out_size
    us = np.arange(out_size)
    src_x = np.clip(np.floor(x0 + (us + 0.5) * scale).astype(np.int64), 0, width - 1)
    src_y = np.clip(np.floor(y0 + (us + 0.5) * scale).astype(np.int64), 0, height - 1)
    return src_y, src_x


class SyntheticBackends:
    """One object serves all capabilities for a corpus of rendered scenes."""

    def __init__(self, scenes: dict[str, Rendered], media_root=None,
                 noise: NoiseSpec | None = None):
        self.scenes = scenes
        self.media_root = Path(media_root) if media_root else None
        self._noise_override = noise

    # -- helpers --------------------------------------------------------

    def _scene(self, meta: RequestMeta) -> Rendered:
        vid = meta.video_id
        if vid is None or vid not in self.scenes:
            raise BackendContractError(f"synthetic backend cannot place request (video_id={vid!r})")
        return self.scenes[vid]

    def _noise(self, scene: Rendered) -> NoiseSpec:
        return self._noise_override if self._noise_override is not None else scene.spec.noise

    @staticmethod
    def _rng(scene: Rendered, *parts) -> np.random.Generator:
        # stable across processes (unlike builtin hash)
        digest = hashlib.sha256(repr((scene.spec.seed,) + parts).encode()).digest()
        return np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))

    # -- capabilities ----------------------------------------------------

    def detect(self, image, prompt: str, meta: RequestMeta) -> list[Detection]:
        scene = self._scene(meta)
        noise = self._noise(scene)
        t = meta.frame_index
        if t is None:
            raise BackendContractError("detect requires meta.frame_index")
        out = []
        for aid, box in sorted(scene.gt.boxes_at(t).items()):
            rng = self._rng(scene, "detect", t, aid)
            if noise.detect_dropout > 0 and rng.random() < noise.detect_dropout:
                continue
            if noise.box_jitter_sigma > 0:
                j = rng.normal(0, noise.box_jitter_sigma, 4)
                box = BBox(
                    min(box.x_min + j[0], box.x_max + j[2]),
                    min(box.y_min + j[1], box.y_max + j[3]),
                    max(box.x_min + j[0], box.x_max + j[2]),
                    max(box.y_min + j[1], box.y_max + j[3]),
                )
            out.append(Detection(box=box, score=0.9, label=prompt))
        return out

    def _swapped(self, scene: Rendered, actor_id: str, frame: int) -> str:
        """Apply scripted identity swaps effective from their frame onward."""
        noise = self._noise(scene)
        current = actor_id
        for swap in sorted(noise.id_swaps, key=lambda s: s["frame"]):
            if frame >= swap["frame"]:
                if current == swap["a"]:
                    current = swap["b"]
                elif current == swap["b"]:
                    current = swap["a"]
        return current

    def segment_track(self, frames, prompts: list[SegmentPrompt],
                      meta: RequestMeta) -> dict[str, dict[int, Mask]]:
        scene = self._scene(meta)
        abs_frames = meta.frame_indices
        if abs_frames is None or len(abs_frames) != len(frames):
            raise BackendContractError("segment_track requires meta.frame_indices per frame")
        h, w = scene.spec.height, scene.spec.width

        def match_actor(local_frame: int, box: BBox) -> str | None:
            gt_boxes = scene.gt.boxes_at(abs_frames[local_frame])
            best, best_iou = None, 0.1
            for aid, gt_box in sorted(gt_boxes.items()):
                iou = bbox_iou(box, gt_box)
                if iou > best_iou:
                    best, best_iou = aid, iou
            return best

        by_instance: dict[str, list[SegmentPrompt]] = {}
        for p in prompts:
            by_instance.setdefault(p.instance, []).append(p)

        result: dict[str, dict[int, Mask]] = {}
        for instance, plist in by_instance.items():
            plist.sort(key=lambda p: p.frame)
            anchors = [(p.frame, match_actor(p.frame, p.box)) for p in plist]
            masks: dict[int, Mask] = {}
            for local in range(len(frames)):
                governing = anchors[0][1]
                for pf, aid in anchors:
                    if pf <= local:
                        governing = aid
                abs_f = abs_frames[local]
                if governing is None:
                    masks[local] = Mask.zeros(h, w)
                    continue
                actual = self._swapped(scene, governing, abs_f)
                per = scene.gt.actors.get(actual, {})
                masks[local] = per[abs_f].full_mask if abs_f in per else Mask.zeros(h, w)
            result[instance] = masks
        return result

    def _actor_for_crop(self, scene: Rendered, t: int, crop) -> str | None:
        x0, y0, side = float(crop[0]), float(crop[1]), float(crop[2])
        rect = BBox(x0, y0, x0 + side, y0 + side)
        best, best_area = None, 0.0
        for aid, gt in sorted(scene.gt.actors.items()):
            if t not in gt:
                continue
            b = gt[t].bbox
            ix = min(rect.x_max, b.x_max) - max(rect.x_min, b.x_min)
            iy = min(rect.y_max, b.y_max) - max(rect.y_min, b.y_min)
            area = max(ix, 0) * max(iy, 0)
            if area > best_area:
                best, best_area = aid, area
        return best

    def keypoints(self, image, box, meta: RequestMeta) -> Keypoints:
        scene = self._scene(meta)
        t = meta.frame_index
        crop = meta.crop
        if t is None or crop is None:
            raise BackendContractError("keypoints requires meta.frame_index and meta.crop")
        out_size = image.shape[0]
        aid = self._actor_for_crop(scene, t, crop)
        if aid is None:
            return Keypoints(np.zeros((17, 3)))
        gt = scene.gt.actors[aid][t].keypoints
        x0, y0, side = float(crop[0]), float(crop[1]), float(crop[2])
        scale = out_size / side
        pts = gt.pts.copy()
        pts[:, 0] = (pts[:, 0] - x0) * scale
        pts[:, 1] = (pts[:, 1] - y0) * scale
        return Keypoints(pts)

    def depth(self, image, meta: RequestMeta) -> np.ndarray:
        scene = self._scene(meta)
        t, crop = meta.frame_index, meta.crop
        if t is None:
            raise BackendContractError("depth requires meta.frame_index")
        src = scene.gt.depth[t]
        if crop is None:
            return src.astype(np.float32)
        out_size = image.shape[0]
        sy, sx = crop_sample_indices(crop, out_size, *src.shape)
        return src[np.ix_(sy, sx)].astype(np.float32)

    def flow(self, image, image_next, meta: RequestMeta) -> np.ndarray:
        from ..synth import flow_between

        scene = self._scene(meta)
        t, crop, crop_next = meta.frame_index, meta.crop, meta.crop_next
        if t is None:
            raise BackendContractError("flow requires meta.frame_index")
        if meta.frame_indices and len(meta.frame_indices) == 2:
            src_flow = flow_between(scene, meta.frame_indices[0], meta.frame_indices[1])
        elif t < len(scene.gt.flow):
            src_flow = scene.gt.flow[t]
        else:
            raise BackendContractError(f"no flow for last frame {t}")
        if crop is None:
            return src_flow.astype(np.float32)
        if crop_next is None:
            crop_next = crop
        out_size = image.shape[0]
        h, w = src_flow.shape[:2]
        sy, sx = crop_sample_indices(crop, out_size, h, w)
        gy, gx = np.meshgrid(sy, sx, indexing="ij")
        fl = src_flow[gy, gx]
        # continuous center-of-cell positions so the crop<->frame mapping is
        # exactly invertible by the consumer
        x0, y0, side = float(crop[0]), float(crop[1]), float(crop[2])
        scale = side / out_size
        us = np.arange(out_size, dtype=np.float64)
        uu, vv = np.meshgrid(us, us, indexing="xy")
        src_cx = x0 + (uu + 0.5) * scale
        src_cy = y0 + (vv + 0.5) * scale
        land_x = src_cx + fl[:, :, 0]
        land_y = src_cy + fl[:, :, 1]
        x0n, y0n, siden = float(crop_next[0]), float(crop_next[1]), float(crop_next[2])
        scale_n = out_size / siden
        crop_land_x = (land_x - x0n) * scale_n - 0.5
        crop_land_y = (land_y - y0n) * scale_n - 0.5
        out = np.stack([crop_land_x - uu, crop_land_y - vv], axis=-1)
        return out.astype(np.float32)

    def embed_text(self, text: str, meta: RequestMeta) -> np.ndarray:
        return _unit_vector_for(text).astype(np.float32)

    def embed_image(self, image, grid: bool, patch: int, meta: RequestMeta) -> np.ndarray:
        scene = self._scene(meta)
        if grid:
            h, w = image.shape[0] // patch, image.shape[1] // patch
            rng = self._rng(scene, "feat", meta.frame_index or 0)
            return rng.standard_normal((h, w, FEATURE_DIM)).astype(np.float32)
        noise = self._noise(scene)
        asked = meta.category or scene.spec.category
        cos = noise.embed_cos_match if asked == scene.spec.category else noise.embed_cos_mismatch
        e_text = _unit_vector_for(f"A photo of {asked}")
        e = cos * e_text + float(np.sqrt(max(1 - cos * cos, 0.0))) * _orthogonal_to(e_text)
        return e.astype(np.float32)

    _BREEDS_RE = re.compile(r"List (\d+) types of ([^.]+)\.")
    _CONTEXT_RE = re.compile(r"List (\d+) search phrases .*searching ([\w ]+) videos")

    def text_generate(self, prompt: str, image, meta: RequestMeta) -> str:
        m = self._BREEDS_RE.search(prompt)
        if m:
            n, cat = int(m.group(1)), m.group(2).strip()
            return repr([f"{cat} breed {i + 1}" for i in range(n)])
        m = self._CONTEXT_RE.search(prompt)
        if m:
            n = int(m.group(1))
            return repr([f"in setting {i + 1}" for i in range(n)])
        if prompt.startswith("Does this image show"):
            scene = self._scene(meta)
            return self._noise(scene).image_check_answer
        return "yes"

    def fetch_video(self, video_id: str, meta: RequestMeta) -> VideoPayload:
        if video_id not in self.scenes:
            raise BackendContractError(f"unknown synthetic video {video_id!r}")
        if self.media_root is None:
            raise BackendContractError("synthetic fetch_video needs a media root")
        out = self.media_root / "fetched" / video_id
        if not (out / "video.json").exists():
            write_scene_video(self.scenes[video_id], out)
        return VideoPayload(path=str(out), container="frame_dir")
