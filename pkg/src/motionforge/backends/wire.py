"""Request/response codecs for the HTTP capability protocol.

One codec pair per capability; the client, the server and Gateway.call all
go through these, so the wire schema is defined exactly once. See
docs/wire_protocol.md for the byte-level contract.
"""

from __future__ import annotations

import base64

import numpy as np

from ..geometry import BBox, Keypoints
from .protocol import BackendContractError, Detection, RequestMeta, SegmentPrompt, VideoPayload
from . import encoding


def _meta(d: dict) -> RequestMeta:
    return RequestMeta.from_dict(d.get("meta"))


def encode_request(kind: str, **kw) -> dict:
    meta: RequestMeta = kw.pop("meta")
    body: dict = {"meta": meta.to_dict()}
    if kind == "text_generate":
        body["prompt"] = kw["prompt"]
        if kw.get("image") is not None:
            body["image"] = encoding.encode_image(kw["image"])
    elif kind == "embed_text":
        body["text"] = kw["text"]
    elif kind == "embed_image":
        body["image"] = encoding.encode_image(kw["image"])
        body["grid"] = bool(kw.get("grid", False))
        body["patch"] = int(kw.get("patch", 14))
    elif kind == "detect":
        body["image"] = encoding.encode_image(kw["image"])
        body["prompt"] = kw["prompt"]
    elif kind == "segment_track":
        body["frames"] = [encoding.encode_image(f) for f in kw["frames"]]
        body["prompts"] = [
            {"frame": p.frame, "instance": p.instance, "box": p.box.to_list()}
            for p in kw["prompts"]
        ]
    elif kind == "keypoints":
        body["image"] = encoding.encode_image(kw["image"])
        if kw.get("box") is not None:
            body["box"] = kw["box"].to_list()
    elif kind == "depth":
        body["image"] = encoding.encode_image(kw["image"])
    elif kind == "flow":
        body["image"] = encoding.encode_image(kw["image"])
        body["image_next"] = encoding.encode_image(kw["image_next"])
    elif kind == "fetch_video":
        body["video_id"] = kw["video_id"]
    else:
        raise ValueError(f"unknown capability {kind!r}")
    return body


def decode_request(kind: str, body: dict) -> dict:
    """Wire body -> kwargs for the in-process capability method."""
    try:
        meta = _meta(body)
        if kind == "text_generate":
            img = encoding.decode_image(body["image"]) if "image" in body else None
            return {"prompt": body["prompt"], "image": img, "meta": meta}
        if kind == "embed_text":
            return {"text": body["text"], "meta": meta}
        if kind == "embed_image":
            return {"image": encoding.decode_image(body["image"]),
                    "grid": bool(body.get("grid", False)),
                    "patch": int(body.get("patch", 14)), "meta": meta}
        if kind == "detect":
            return {"image": encoding.decode_image(body["image"]),
                    "prompt": body["prompt"], "meta": meta}
        if kind == "segment_track":
            return {"frames": [encoding.decode_image(f) for f in body["frames"]],
                    "prompts": [SegmentPrompt(frame=int(p["frame"]), instance=str(p["instance"]),
                                              box=BBox.from_list(p["box"]))
                                for p in body["prompts"]],
                    "meta": meta}
        if kind == "keypoints":
            box = BBox.from_list(body["box"]) if "box" in body else None
            return {"image": encoding.decode_image(body["image"]), "box": box, "meta": meta}
        if kind == "depth":
            return {"image": encoding.decode_image(body["image"]), "meta": meta}
        if kind == "flow":
            return {"image": encoding.decode_image(body["image"]),
                    "image_next": encoding.decode_image(body["image_next"]), "meta": meta}
        if kind == "fetch_video":
            return {"video_id": body["video_id"], "meta": meta}
    except (KeyError, TypeError, ValueError) as exc:
        raise BackendContractError(f"malformed {kind} request: {exc}") from exc
    raise ValueError(f"unknown capability {kind!r}")


def encode_response(kind: str, result) -> dict:
    if kind == "text_generate":
        return {"text": result}
    if kind in ("embed_text",):
        return {"vector": [float(x) for x in result]}
    if kind == "embed_image":
        if result.ndim == 1:
            return {"vector": [float(x) for x in result]}
        return {"grid": encoding.encode_grid(result)}
    if kind == "detect":
        return {
            "boxes": [d.box.to_list() for d in result],
            "scores": [d.score for d in result],
            "labels": [d.label for d in result],
        }
    if kind == "segment_track":
        return {"masks": {
            inst: {str(f): encoding.encode_mask(m) for f, m in per.items()}
            for inst, per in result.items()
        }}
    if kind == "keypoints":
        return {"keypoints": result.to_json()}
    if kind in ("depth", "flow"):
        return {"grid": encoding.encode_grid(result)}
    if kind == "fetch_video":
        if result.data is None and result.path is not None:
            import io
            import zipfile

            from pathlib import Path

            buf = io.BytesIO()
            root = Path(result.path)
            with zipfile.ZipFile(buf, "w") as zf:
                for f in sorted(root.rglob("*")):
                    if f.is_file():
                        zf.write(f, f.relative_to(root))
            data = buf.getvalue()
            return {"container": "frame_dir_zip",
                    "data_b64": base64.b64encode(data).decode("ascii")}
        return {"container": result.container, "filename": result.filename,
                "data_b64": base64.b64encode(result.data or b"").decode("ascii")}
    raise ValueError(f"unknown capability {kind!r}")


def decode_response(kind: str, body: dict):
    try:
        if kind == "text_generate":
            return body["text"]
        if kind == "embed_text":
            return np.asarray(body["vector"], dtype=np.float32)
        if kind == "embed_image":
            if "vector" in body:
                return np.asarray(body["vector"], dtype=np.float32)
            return encoding.decode_grid(body["grid"])
        if kind == "detect":
            boxes = [BBox.from_list(b) for b in body["boxes"]]
            scores = body["scores"]
            labels = body.get("labels") or [""] * len(boxes)
            return [Detection(box=b, score=float(s), label=l)
                    for b, s, l in zip(boxes, scores, labels)]
        if kind == "segment_track":
            return {inst: {int(f): encoding.decode_mask(m) for f, m in per.items()}
                    for inst, per in body["masks"].items()}
        if kind == "keypoints":
            return Keypoints.from_json(body["keypoints"])
        if kind in ("depth", "flow"):
            return encoding.decode_grid(body["grid"])
        if kind == "fetch_video":
            return VideoPayload(
                data=base64.b64decode(body["data_b64"]),
                container=body["container"],
                filename=body.get("filename"),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise BackendContractError(f"malformed {kind} response: {exc}") from exc
    raise ValueError(f"unknown capability {kind!r}")
