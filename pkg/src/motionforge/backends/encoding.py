"""Wire encodings: base64 PNG images/masks and LE float32 grids.

Grid payload: {"width", "height", "channels", "dtype": "<f4",
"data_b64": base64 of row-major little-endian float32}. Documented
bit-exactly in docs/wire_protocol.md.
"""

from __future__ import annotations

import base64

import cv2
import numpy as np

from ..geometry import Mask
from .protocol import BackendContractError


def encode_image(image: np.ndarray) -> dict:
    ok, buf = cv2.imencode(".png", cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
    if not ok:
        raise ValueError("PNG encode failed")
    return {"png_b64": base64.b64encode(buf.tobytes()).decode("ascii")}


def decode_image(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["png_b64"])
    img = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_COLOR)
    if img is None:
        raise BackendContractError("undecodable image payload")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def encode_mask(mask: Mask) -> dict:
    ok, buf = cv2.imencode(".png", mask.bits * np.uint8(255))
    if not ok:
        raise ValueError("PNG encode failed")
    return {"png_b64": base64.b64encode(buf.tobytes()).decode("ascii")}


def decode_mask(payload: dict) -> Mask:
    raw = base64.b64decode(payload["png_b64"])
    img = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise BackendContractError("undecodable mask payload")
    return Mask(img >= 128)


def encode_grid(arr: np.ndarray) -> dict:
    a = np.asarray(arr, dtype="<f4")
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"grid must be 2D or 3D, got shape {arr.shape}")
    h, w, c = a.shape
    return {
        "width": w,
        "height": h,
        "channels": c,
        "dtype": "<f4",
        "data_b64": base64.b64encode(np.ascontiguousarray(a).tobytes()).decode("ascii"),
    }


def decode_grid(payload: dict) -> np.ndarray:
    try:
        w, h, c = int(payload["width"]), int(payload["height"]), int(payload["channels"])
        raw = base64.b64decode(payload["data_b64"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BackendContractError(f"malformed grid payload: {exc}") from exc
    expect = w * h * c * 4
    if len(raw) != expect:
        raise BackendContractError(f"grid payload size {len(raw)} != {expect}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(h, w, c)
    return arr[:, :, 0] if c == 1 else arr
