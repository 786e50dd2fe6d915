"""Stage 2 preprocessing: shot splitting, still/short-clip removal, frame-rate
resampling, and the semantic clip score.

Minimum length is enforced on the source-rate clip (short shots are noise
regardless of rate) and again after resampling, so every emitted clip
carries at least min_len frames at the target rate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .backends.gateway import Gateway
from .backends.protocol import RequestMeta
from .geometry import Frame

log = logging.getLogger(__name__)

DEFAULT_SHOT_THRESHOLD = 25.0
DEFAULT_MIN_LEN = 30
DEFAULT_TARGET_FPS = 10.0
DEFAULT_STILL_EPS = 0.5
DEFAULT_SEMANTIC_WEIGHT = 2.5
DEFAULT_SEMANTIC_SAMPLES = 10


def mean_hsv_diff(f1: Frame, f2: Frame) -> float:
    """Mean per-pixel, per-channel absolute HSV difference (8-bit scale)."""
    return kernels.mean_hsv_diff(f1.image, f2.image)


def detect_shots(frames: list[Frame], threshold: float = DEFAULT_SHOT_THRESHOLD) -> list[int]:
    """Indices i where the diff between frames i-1 and i reaches the threshold."""
    cuts = []
    for i in range(1, len(frames)):
        if kernels.mean_hsv_diff(frames[i - 1].image, frames[i].image) >= threshold:
            cuts.append(i)
    return cuts


@dataclass
class Clip:
    """One emitted clip: resampled frames plus their source-frame indices."""

    source_start: int
    source_end: int  # exclusive, source-rate frames
    source_frames: list[int] = field(default_factory=list)
    frames: list[Frame] = field(default_factory=list)
    fps: float = DEFAULT_TARGET_FPS

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def split_and_filter(frames: list[Frame], source_fps: float,
                     threshold: float = DEFAULT_SHOT_THRESHOLD,
                     min_len: int = DEFAULT_MIN_LEN,
                     target_fps: float = DEFAULT_TARGET_FPS,
                     still_eps: float = DEFAULT_STILL_EPS) -> list[Clip]:
    """Split at shot changes, drop short and still clips, resample frame rate."""
    if len(frames) < 1:
        return []
    diffs = [kernels.mean_hsv_diff(frames[i - 1].image, frames[i].image)
             for i in range(1, len(frames))]
    cuts = [i for i, d in enumerate(diffs, start=1) if d >= threshold]
    boundaries = [0] + cuts + [len(frames)]

    clips: list[Clip] = []
    for b, e in zip(boundaries, boundaries[1:]):
        n_src = e - b
        if n_src < min_len:
            log.debug("clip [%d,%d) dropped: %d < min_len %d", b, e, n_src, min_len)
            continue
        inner = diffs[b : e - 1]  # diffs between consecutive frames inside [b, e)
        if not any(d >= still_eps for d in inner):
            log.debug("clip [%d,%d) dropped: still", b, e)
            continue
        duration = n_src / source_fps
        picked: list[int] = []
        k = 0
        while k / target_fps < duration:
            src = b + int(round(k / target_fps * source_fps))
            picked.append(min(src, e - 1))
            k += 1
        if len(picked) < min_len:
            log.debug("clip [%d,%d) dropped post-resample: %d < min_len", b, e, len(picked))
            continue
        resampled = [
            Frame(index=j, timestamp=j / target_fps, image=frames[s].image)
            for j, s in enumerate(picked)
        ]
        clips.append(Clip(source_start=b, source_end=e, source_frames=picked,
                          frames=resampled, fps=target_fps))
    return clips


def clip_semantic_score(clip: Clip, category: str, gateway: Gateway,
                        n_samples: int = DEFAULT_SEMANTIC_SAMPLES,
                        weight: float = DEFAULT_SEMANTIC_WEIGHT,
                        seed: int = 0, video_id: str | None = None) -> float:
    """Mean over sampled frames of weight * max(cos(image, text), 0)."""
    if not clip.frames:
        raise ValueError("empty clip")
    rng = np.random.default_rng(seed)
    n = min(n_samples, clip.n_frames)
    picks = sorted(rng.choice(clip.n_frames, size=n, replace=False).tolist())
    text_vec = gateway.embed_text(
        f"A photo of {category}", RequestMeta(category=category, video_id=video_id))
    text_vec = text_vec / np.linalg.norm(text_vec)
    total = 0.0
    for j in picks:
        meta = RequestMeta(category=category, video_id=video_id,
                           frame_index=clip.source_frames[j])
        v = gateway.embed_image(clip.frames[j].image, meta)
        v = v / np.linalg.norm(v)
        total += weight * max(float(v @ text_vec), 0.0)
    return total / n
