"""Uniform entry point to the model capabilities.

Validates every response shape before it can reach the pipeline, retries
transport failures with exponential backoff, and bounds in-flight calls per
capability. Stateless apart from the semaphores.
"""

from __future__ import annotations

import io
import logging
import threading
import time
import zipfile
from pathlib import Path

import numpy as np

from ..geometry import Keypoints, Mask
from .protocol import (
    CAPABILITIES,
    BackendContractError,
    Detection,
    RequestMeta,
    RetriableBackendError,
    SegmentPrompt,
    VideoPayload,
)
from . import wire

log = logging.getLogger(__name__)


class Gateway:
    def __init__(self, impls: dict[str, object], retries: int = 3,
                 backoff: float = 0.2, max_inflight: int = 8):
        unknown = set(impls) - set(CAPABILITIES)
        if unknown:
            raise ValueError(f"unknown capabilities: {sorted(unknown)}")
        self.impls = impls
        self.retries = retries
        self.backoff = backoff
        self._sems = {k: threading.Semaphore(max_inflight) for k in impls}

    def _impl(self, kind: str):
        impl = self.impls.get(kind)
        if impl is None:
            raise BackendContractError(f"capability {kind!r} not configured")
        return impl

    def _invoke(self, kind: str, fn, *args, **kw):
        attempt = 0
        with self._sems[kind]:
            while True:
                try:
                    return fn(*args, **kw)
                except RetriableBackendError as exc:
                    attempt += 1
                    if attempt >= self.retries:
                        raise
                    delay = self.backoff * (2 ** (attempt - 1))
                    log.warning("%s failed (%s); retry %d/%d in %.2fs",
                                kind, exc, attempt, self.retries - 1, delay)
                    time.sleep(delay)

    # -- typed entry points (each validates the response shape) ---------

    def text_generate(self, prompt: str, meta: RequestMeta, image=None) -> str:
        impl = self._impl("text_generate")
        out = self._invoke("text_generate", impl.text_generate, prompt, image, meta)
        if not isinstance(out, str):
            raise BackendContractError("text_generate must return a string")
        return out

    def embed_text(self, text: str, meta: RequestMeta) -> np.ndarray:
        impl = self._impl("embed_text")
        vec = np.asarray(self._invoke("embed_text", impl.embed_text, text, meta), dtype=np.float32)
        if vec.ndim != 1 or vec.size == 0:
            raise BackendContractError(f"embed_text vector has shape {vec.shape}")
        return vec

    def embed_image(self, image: np.ndarray, meta: RequestMeta,
                    grid: bool = False, patch: int = 14) -> np.ndarray:
        impl = self._impl("embed_image")
        out = np.asarray(self._invoke("embed_image", impl.embed_image, image, grid, patch, meta))
        if grid:
            eh, ew = image.shape[0] // patch, image.shape[1] // patch
            if out.ndim != 3 or out.shape[:2] != (eh, ew):
                raise BackendContractError(
                    f"feature grid shape {out.shape} != ({eh}, {ew}, D)")
        elif out.ndim != 1 or out.size == 0:
            raise BackendContractError(f"embed_image vector has shape {out.shape}")
        return out.astype(np.float32)

    def detect(self, image: np.ndarray, prompt: str, meta: RequestMeta) -> list[Detection]:
        impl = self._impl("detect")
        dets = self._invoke("detect", impl.detect, image, prompt, meta)
        h, w = image.shape[:2]
        for d in dets:
            if not (0 <= d.score <= 1):
                raise BackendContractError(f"detection score {d.score} outside [0,1]")
            if d.box.x_max < 0 or d.box.y_max < 0 or d.box.x_min > w or d.box.y_min > h:
                raise BackendContractError(f"detection box {d.box} outside frame {w}x{h}")
        return dets

    def segment_track(self, frames: list[np.ndarray], prompts: list[SegmentPrompt],
                      meta: RequestMeta) -> dict[str, dict[int, Mask]]:
        impl = self._impl("segment_track")
        out = self._invoke("segment_track", impl.segment_track, frames, prompts, meta)
        h, w = frames[0].shape[:2]
        for inst, per in out.items():
            if set(per) != set(range(len(frames))):
                raise BackendContractError(
                    f"instance {inst!r} masks cover frames {sorted(per)} != 0..{len(frames) - 1}")
            for f, m in per.items():
                if (m.height, m.width) != (h, w):
                    raise BackendContractError(
                        f"mask {inst}/{f} is {m.width}x{m.height}, frames are {w}x{h}")
        return out

    def keypoints(self, image: np.ndarray, meta: RequestMeta, box=None) -> Keypoints:
        impl = self._impl("keypoints")
        kps = self._invoke("keypoints", impl.keypoints, image, box, meta)
        if not isinstance(kps, Keypoints) or kps.count == 0:
            raise BackendContractError("keypoints response empty or mistyped")
        return kps

    def depth(self, image: np.ndarray, meta: RequestMeta) -> np.ndarray:
        impl = self._impl("depth")
        grid = np.asarray(self._invoke("depth", impl.depth, image, meta), dtype=np.float32)
        if grid.shape != image.shape[:2]:
            raise BackendContractError(f"depth grid {grid.shape} != frame {image.shape[:2]}")
        return grid

    def flow(self, image: np.ndarray, image_next: np.ndarray, meta: RequestMeta) -> np.ndarray:
        impl = self._impl("flow")
        grid = np.asarray(self._invoke("flow", impl.flow, image, image_next, meta),
                          dtype=np.float32)
        if grid.shape != (*image.shape[:2], 2):
            raise BackendContractError(f"flow grid {grid.shape} != (H, W, 2)")
        return grid

    def fetch_video(self, video_id: str, meta: RequestMeta, dest_dir) -> Path:
        """Fetch and materialize a video; returns the local container path."""
        impl = self._impl("fetch_video")
        payload: VideoPayload = self._invoke("fetch_video", impl.fetch_video, video_id, meta)
        dest_dir = Path(dest_dir)
        dest_dir.mkdir(parents=True, exist_ok=True)
        if payload.path is not None:
            return Path(payload.path)
        if payload.container == "frame_dir_zip":
            out = dest_dir / video_id
            with zipfile.ZipFile(io.BytesIO(payload.data)) as zf:
                zf.extractall(out)
            return out
        if payload.container == "file":
            out = dest_dir / (payload.filename or f"{video_id}.bin")
            out.write_bytes(payload.data)
            return out
        raise BackendContractError(f"unknown video container {payload.container!r}")

    # -- generic wire-level entry ---------------------------------------

    def call(self, capability: str, request: dict) -> dict:
        """Dispatch a wire-format request document, returning the wire response."""
        kw = wire.decode_request(capability, request)
        method = getattr(self, capability)
        if capability == "fetch_video":
            raise ValueError("fetch_video requires a destination; use the typed method")
        if capability == "text_generate":
            result = method(kw["prompt"], kw["meta"], image=kw["image"])
        elif capability == "embed_image":
            result = method(kw["image"], kw["meta"], grid=kw["grid"], patch=kw["patch"])
        elif capability == "keypoints":
            result = method(kw["image"], kw["meta"], box=kw["box"])
        elif capability == "embed_text":
            result = method(kw["text"], kw["meta"])
        elif capability == "detect":
            result = method(kw["image"], kw["prompt"], kw["meta"])
        elif capability == "segment_track":
            result = method(kw["frames"], kw["prompts"], kw["meta"])
        elif capability == "depth":
            result = method(kw["image"], kw["meta"])
        elif capability == "flow":
            result = method(kw["image"], kw["image_next"], kw["meta"])
        else:
            raise ValueError(f"unknown capability {capability!r}")
        return wire.encode_response(capability, result)
