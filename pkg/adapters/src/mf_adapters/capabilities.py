"""Capability implementations backed by real models or classical algorithms.

Each adapter exposes load() which either prepares the implementation or
raises CapabilityUnavailable with the reason (missing package, missing
weights, unconfigured endpoint). The service only mounts routes for adapters
that loaded, so availability is explicit at startup. Model loading is lazy
and guarded by a lock; inference runs under the same lock to keep models safe
from concurrent mutation.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path

import cv2
import numpy as np

from motionforge.backends.protocol import (
    BackendContractError,
    Detection,
    RetriableBackendError,
    VideoPayload,
)
from motionforge.geometry import BBox, Keypoints, Mask

from .config import AdapterConfig

log = logging.getLogger(__name__)


class CapabilityUnavailable(Exception):
    pass


class FarnebackFlow:
    """Dense optical flow via the Farneback algorithm; no weights needed."""

    capability = "flow"

    def __init__(self, cfg: AdapterConfig):
        pass

    def load(self):
        return self

    def flow(self, image, image_next, meta) -> np.ndarray:
        g0 = cv2.cvtColor(image, cv2.COLOR_RGB2GRAY)
        g1 = cv2.cvtColor(image_next, cv2.COLOR_RGB2GRAY)
        out = cv2.calcOpticalFlowFarneback(
            g0, g1, None, pyr_scale=0.5, levels=3, winsize=15,
            iterations=3, poly_n=5, poly_sigma=1.2, flags=0)
        return out.astype(np.float32)


class LocalVideoFetch:
    """Serves videos from a local directory: <video_dir>/<id> (frame dir) or
    <video_dir>/<id>.<ext> (container file)."""

    capability = "fetch_video"

    def __init__(self, cfg: AdapterConfig):
        self.root = Path(cfg.video_dir)

    def load(self):
        if not self.root.exists():
            raise CapabilityUnavailable(f"video_dir {self.root} does not exist")
        return self

    def fetch_video(self, video_id, meta) -> VideoPayload:
        as_dir = self.root / video_id
        if (as_dir / "video.json").exists():
            return VideoPayload(path=str(as_dir), container="frame_dir")
        for f in sorted(self.root.glob(f"{video_id}.*")):
            return VideoPayload(data=f.read_bytes(), container="file", filename=f.name)
        raise BackendContractError(f"no local video {video_id!r} under {self.root}")


class OpenAICompatText:
    """text_generate via an OpenAI-compatible chat completions endpoint."""

    capability = "text_generate"

    def __init__(self, cfg: AdapterConfig):
        self.cfg = cfg.text

    def load(self):
        if not self.cfg.base_url:
            raise CapabilityUnavailable("text.base_url not configured")
        import httpx

        self._client = httpx.Client(base_url=self.cfg.base_url,
                                    timeout=self.cfg.timeout)
        return self

    def text_generate(self, prompt, image, meta) -> str:
        import base64

        content = [{"type": "text", "text": prompt}]
        if image is not None:
            ok, buf = cv2.imencode(".png", cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
            b64 = base64.b64encode(buf.tobytes()).decode()
            content.append({"type": "image_url",
                            "image_url": {"url": f"data:image/png;base64,{b64}"}})
        try:
            resp = self._client.post(
                "/chat/completions",
                headers={"Authorization": f"Bearer {self.cfg.api_key}"},
                json={"model": self.cfg.model,
                      "messages": [{"role": "user", "content": content}]})
        except Exception as exc:
            raise RetriableBackendError(f"text endpoint: {exc}") from exc
        if resp.status_code >= 500:
            raise RetriableBackendError(f"text endpoint {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendContractError(f"text endpoint rejected: {resp.text[:200]}")
        return resp.json()["choices"][0]["message"]["content"]


class _LazyTorchAdapter:
    """Shared lazy-loading scaffold for transformers-backed adapters."""

    capability = ""
    model_key = ""

    def __init__(self, cfg: AdapterConfig):
        self.cfg = cfg
        self.model_name = cfg.models.get(self.model_key, "")
        self._lock = threading.Lock()
        self._loaded = None

    def load(self):
        try:
            self._load_impl()
        except CapabilityUnavailable:
            raise
        except ImportError as exc:
            raise CapabilityUnavailable(f"missing package: {exc}") from exc
        except Exception as exc:
            raise CapabilityUnavailable(
                f"weights for {self.model_name!r} unavailable: {exc}") from exc
        return self

    def _load_impl(self):  # pragma: no cover - requires model weights
        raise NotImplementedError


class TransformersDepth(_LazyTorchAdapter):
    capability = "depth"
    model_key = "depth"

    def _load_impl(self):  # pragma: no cover - requires model weights
        from transformers import pipeline

        self._pipe = pipeline("depth-estimation", model=self.model_name,
                              device=self.cfg.device)

    def depth(self, image, meta) -> np.ndarray:  # pragma: no cover
        from PIL import Image

        with self._lock:
            out = self._pipe(Image.fromarray(image))
        depth = np.asarray(out["predicted_depth"], dtype=np.float32)
        if depth.shape != image.shape[:2]:
            depth = cv2.resize(depth, (image.shape[1], image.shape[0]),
                               interpolation=cv2.INTER_LINEAR)
        return depth  # relative depth, larger = nearer


class TransformersDetect(_LazyTorchAdapter):
    capability = "detect"
    model_key = "detect"

    def _load_impl(self):  # pragma: no cover - requires model weights
        from transformers import pipeline

        self._pipe = pipeline("zero-shot-object-detection", model=self.model_name,
                              device=self.cfg.device)

    def detect(self, image, prompt, meta):  # pragma: no cover
        from PIL import Image

        with self._lock:
            out = self._pipe(Image.fromarray(image), candidate_labels=[prompt])
        dets = []
        for hit in out:
            if hit["score"] < self.cfg.detect_threshold:
                continue
            b = hit["box"]
            dets.append(Detection(
                box=BBox(b["xmin"], b["ymin"], b["xmax"], b["ymax"]),
                score=float(hit["score"]), label=hit["label"]))
        return dets


class TransformersKeypoints(_LazyTorchAdapter):
    capability = "keypoints"
    model_key = "keypoints"

    def _load_impl(self):  # pragma: no cover - requires model weights
        import torch
        from transformers import AutoProcessor, VitPoseForPoseEstimation

        self._torch = torch
        self._processor = AutoProcessor.from_pretrained(self.model_name)
        self._model = VitPoseForPoseEstimation.from_pretrained(self.model_name)
        self._model.to(self.cfg.device).eval()

    def keypoints(self, image, box, meta) -> Keypoints:  # pragma: no cover
        h, w = image.shape[:2]
        box_xywh = [0.0, 0.0, float(w), float(h)]
        if box is not None:
            box_xywh = [box.x_min, box.y_min, box.width, box.height]
        inputs = self._processor(image, boxes=[[box_xywh]], return_tensors="pt")
        with self._lock, self._torch.no_grad():
            out = self._model(**{k: v.to(self.cfg.device) for k, v in inputs.items()})
        pose = self._processor.post_process_pose_estimation(out, boxes=[[box_xywh]])[0][0]
        pts = np.column_stack([
            pose["keypoints"].cpu().numpy(),
            np.clip(pose["scores"].cpu().numpy(), 0, 1),
        ])
        return Keypoints(pts)


class ClipEmbed(_LazyTorchAdapter):
    capability = "embed"  # serves both embed_image and embed_text
    model_key = "embed"

    def _load_impl(self):  # pragma: no cover - requires model weights
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self._processor = CLIPProcessor.from_pretrained(self.model_name)
        self._model = CLIPModel.from_pretrained(self.model_name)
        self._model.to(self.cfg.device).eval()

    def embed_text(self, text, meta) -> np.ndarray:  # pragma: no cover
        inputs = self._processor(text=[text], return_tensors="pt", padding=True)
        with self._lock, self._torch.no_grad():
            vec = self._model.get_text_features(**inputs)
        return vec[0].cpu().numpy().astype(np.float32)

    def embed_image(self, image, grid, patch, meta) -> np.ndarray:  # pragma: no cover
        from PIL import Image

        inputs = self._processor(images=Image.fromarray(image), return_tensors="pt")
        with self._lock, self._torch.no_grad():
            if not grid:
                vec = self._model.get_image_features(**inputs)
                return vec[0].cpu().numpy().astype(np.float32)
            out = self._model.vision_model(**inputs)
        tokens = out.last_hidden_state[0, 1:].cpu().numpy()  # drop CLS
        side = int(np.sqrt(tokens.shape[0]))
        grid_feats = tokens.reshape(side, side, -1)
        eh, ew = image.shape[0] // patch, image.shape[1] // patch
        resized = cv2.resize(grid_feats, (ew, eh), interpolation=cv2.INTER_LINEAR)
        return resized.reshape(eh, ew, -1).astype(np.float32)


class Sam2SegmentTrack(_LazyTorchAdapter):
    capability = "segment_track"
    model_key = "segment"

    def _load_impl(self):
        import importlib.util

        if importlib.util.find_spec("sam2") is None:
            raise CapabilityUnavailable("sam2 package not installed")
        raise CapabilityUnavailable("promptable video segmentation weights not bundled")

    def segment_track(self, frames, prompts, meta) -> dict[str, dict[int, Mask]]:
        raise NotImplementedError  # pragma: no cover


ADAPTER_CLASSES = [
    FarnebackFlow,
    LocalVideoFetch,
    OpenAICompatText,
    TransformersDepth,
    TransformersDetect,
    TransformersKeypoints,
    ClipEmbed,
    Sam2SegmentTrack,
]


def probe_adapters(cfg: AdapterConfig) -> tuple[dict[str, object], dict[str, str]]:
    """Load every adapter; returns (capability -> impl, capability -> reason)."""
    impls: dict[str, object] = {}
    unavailable: dict[str, str] = {}
    for cls in ADAPTER_CLASSES:
        adapter = cls(cfg)
        caps = (["embed_image", "embed_text"] if cls.capability == "embed"
                else [cls.capability])
        try:
            loaded = adapter.load()
        except CapabilityUnavailable as exc:
            for cap in caps:
                unavailable[cap] = str(exc)
            log.info("capability %s unavailable: %s", "/".join(caps), exc)
            continue
        for cap in caps:
            impls[cap] = loaded
    return impls, unavailable
