"""Frame and video I/O.

Two containers are decodable: a frame directory (frames/%06d.png plus
video.json carrying fps) and anything cv2.VideoCapture opens. All in-memory
images are (H, W, 3) uint8 RGB; conversion to BGR happens only at the cv2
call boundary.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

from .geometry import Frame


class MediaError(Exception):
    pass


def write_png(path, image: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ok = cv2.imwrite(str(path), cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
    if not ok:
        raise MediaError(f"failed to write {path}")


def read_png(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise MediaError(f"failed to read {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def write_frame_dir(path, images: list[np.ndarray], fps: float, meta: dict | None = None) -> None:
    """Write a frame-directory video: frames/%06d.png + video.json."""
    path = Path(path)
    (path / "frames").mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(images):
        write_png(path / "frames" / f"{i:06d}.png", img)
    info = {"fps": fps, "n_frames": len(images)}
    if images:
        info["height"], info["width"] = images[0].shape[:2]
    info.update(meta or {})
    (path / "video.json").write_text(json.dumps(info, indent=1))


class VideoReader:
    """Sequential access to frames with timestamps, from either container."""

    def __init__(self, path):
        self.path = Path(path)
        if self.path.is_dir():
            info = json.loads((self.path / "video.json").read_text())
            self.fps = float(info["fps"])
            self._files = sorted((self.path / "frames").glob("*.png"))
            if not self._files:
                raise MediaError(f"no frames in {self.path}")
            self._cap = None
        elif self.path.is_file():
            cap = cv2.VideoCapture(str(self.path))
            if not cap.isOpened():
                raise MediaError(f"cannot decode {self.path}")
            self.fps = cap.get(cv2.CAP_PROP_FPS) or 30.0
            self._cap = cap
            self._files = None
        else:
            raise MediaError(f"no such video: {self.path}")

    def frames(self):
        """Yield Frame objects; timestamp = index / fps."""
        if self._files is not None:
            for i, f in enumerate(self._files):
                yield Frame(index=i, timestamp=i / self.fps, image=read_png(f))
        else:
            i = 0
            while True:
                ok, bgr = self._cap.read()
                if not ok:
                    break
                yield Frame(index=i, timestamp=i / self.fps,
                            image=cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB))
                i += 1

    def read_all(self) -> list[Frame]:
        return list(self.frames())

    def close(self):
        if self._cap is not None:
            self._cap.release()


def resize_rgb(image: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize to size x size."""
    return cv2.resize(image, (size, size), interpolation=cv2.INTER_LINEAR)


def resize_mask(bits: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor resize (preserves binarity).

    Samples at output cell centers with floor rounding; the same map is used
    to crop and to uncrop, so upsample-then-downsample is lossless.
    """
    h, w = bits.shape[:2]
    ys = np.clip(((np.arange(size) + 0.5) * h / size).astype(np.int64), 0, h - 1)
    xs = np.clip(((np.arange(size) + 0.5) * w / size).astype(np.int64), 0, w - 1)
    return bits[np.ix_(ys, xs)]
