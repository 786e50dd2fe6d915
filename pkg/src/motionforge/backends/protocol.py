"""Capability protocol shared by in-process and wire backends.

Eight model capabilities plus video fetch; each pipeline run binds one
implementation per capability it needs. Implementations are duck-typed:
anything with the method for a capability can serve it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

CAPABILITIES = (
    "text_generate",
    "embed_image",
    "embed_text",
    "detect",
    "segment_track",
    "keypoints",
    "depth",
    "flow",
    "fetch_video",
)


class BackendError(Exception):
    pass


class RetriableBackendError(BackendError):
    """Transport-level failure; the work item stays claimable."""


class BackendContractError(BackendError):
    """Response violated the declared shape; fatal for the item."""


class BackendParseError(BackendError):
    """Text backend output could not be parsed; raw text preserved."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass
class Detection:
    box: "BBox"
    score: float
    label: str = ""


@dataclass
class SegmentPrompt:
    frame: int  # index into the request's frame list
    instance: str
    box: "BBox"


@dataclass
class VideoPayload:
    """Either a local path (in-process backends) or raw bytes to unpack."""

    path: str | None = None
    data: bytes | None = None
    container: str = "frame_dir"  # "frame_dir" | "frame_dir_zip" | "file"
    filename: str | None = None


@dataclass
class RequestMeta:
    """Provenance attached to every call; synthetic backends answer from it.

    crop rects are [x0, y0, side, out_size] in source-frame pixels.
    """

    video_id: str | None = None
    clip_id: str | None = None
    track_id: str | None = None
    category: str | None = None
    frame_index: int | None = None
    frame_indices: list[int] | None = None
    crop: list[float] | None = None
    crop_next: list[float] | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if v not in (None, {}, [])}
        return out

    @classmethod
    def from_dict(cls, d: dict | None) -> "RequestMeta":
        d = dict(d or {})
        known = {k: d.pop(k) for k in list(d) if k in cls.__dataclass_fields__ and k != "extra"}
        extra = d.pop("extra", {})
        extra.update(d)
        return cls(**known, extra=extra)


from ..geometry import BBox  # noqa: E402  (type used above by name only)
