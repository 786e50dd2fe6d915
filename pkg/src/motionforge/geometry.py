"""Domain types and pure geometric primitives shared by every stage.

Boxes live in continuous pixel coordinates (origin top-left) and use
continuous areas; masks are discrete cell grids and use cell counts. Depth,
flow and feature grids are plain float32 arrays with documented conventions:
depth (H, W) with larger = nearer, flow (H, W, 2) as (dx, dy) pixels/frame,
features (H', W', D).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from . import kernels


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"inverted box: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, v) -> "BBox":
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


def bbox_iou(a: BBox, b: BBox) -> float:
    """Continuous-area IoU; 0 when the union is empty or boxes are disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


class Mask:
    """Binary cell grid. ``bits`` is a (height, width) uint8 array of 0/1."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        b = np.asarray(bits)
        if b.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {b.shape}")
        self.bits = (b > 0).astype(np.uint8)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other) -> bool:
        return isinstance(other, Mask) and self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )

    def tight_bbox(self) -> BBox | None:
        """Tight bounding box of the set cells (None for an empty mask).

        The box spans the full extent of the set cells, i.e. x_max/y_max are
        exclusive cell edges, so a single set cell has area 1.
        """
        ys, xs = np.nonzero(self.bits)
        if len(ys) == 0:
            return None
        return BBox(float(xs.min()), float(ys.min()), float(xs.max()) + 1.0, float(ys.max()) + 1.0)

    @classmethod
    def zeros(cls, height: int, width: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    def save_png(self, path) -> None:
        """8-bit single-channel PNG: 0 background, 255 foreground."""
        ok = cv2.imwrite(str(path), self.bits * np.uint8(255))
        if not ok:
            raise IOError(f"failed to write mask {path}")

    @classmethod
    def load_png(cls, path) -> "Mask":
        img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
        if img is None:
            raise IOError(f"failed to read mask {path}")
        return cls(img >= 128)


def mask_iou(a: Mask, b: Mask) -> float:
    """Cell-count IoU; 0 when both masks are empty."""
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"mask dimension mismatch: {a.bits.shape} vs {b.bits.shape}")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 0.0
    return inter / union


def morph(m: Mask, radius: int, mode: str) -> Mask:
    """Binary morphology with a Chebyshev disc (square side 2*radius+1)."""
    if mode == "dilate":
        return Mask(kernels.dilate(m.bits, radius))
    if mode == "erode":
        return Mask(kernels.erode(m.bits, radius))
    raise ValueError(f"unknown morph mode {mode!r}")


def boundary(m: Mask) -> Mask:
    """Set cells with >=1 unset 4-neighbor, the image edge counting as unset."""
    return Mask(kernels.boundary(m.bits))


def boundary_points(m: Mask) -> np.ndarray:
    """Boundary cells as an (N, 2) int64 array of (row, col), row-major order."""
    ys, xs = np.nonzero(kernels.boundary(m.bits))
    return np.stack([ys, xs], axis=1).astype(np.int64)


class Keypoints:
    """K joints as an (K, 3) float array of (x, y, confidence)."""

    __slots__ = ("pts",)

    def __init__(self, pts: np.ndarray):
        p = np.asarray(pts, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"keypoints must be (K, 3), got {p.shape}")
        if ((p[:, 2] < 0) | (p[:, 2] > 1)).any():
            raise ValueError("confidence must be within [0, 1]")
        self.pts = p

    @property
    def count(self) -> int:
        return self.pts.shape[0]

    @property
    def xy(self) -> np.ndarray:
        return self.pts[:, :2]

    @property
    def confidence(self) -> np.ndarray:
        return self.pts[:, 2]

    def visible(self, floor: float = 0.3) -> np.ndarray:
        return self.pts[:, 2] >= floor

    def to_json(self) -> list[list[float]]:
        return [[float(x), float(y), float(c)] for x, y, c in self.pts]

    @classmethod
    def from_json(cls, data) -> "Keypoints":
        return cls(np.asarray(data, dtype=np.float64).reshape(-1, 3))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Keypoints":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class Frame:
    """One video frame; image is (H, W, 3) uint8 RGB."""

    index: int
    timestamp: float
    image: np.ndarray = field(repr=False)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]


# 17-joint quadruped skeleton used as the default; the benchmark manifest
# declares the skeleton explicitly, so nothing downstream hard-codes this.
QUADRUPED17_JOINTS = [
    "left_eye", "right_eye", "nose", "neck", "tail_base",
    "left_shoulder", "left_elbow", "left_front_paw",
    "right_shoulder", "right_elbow", "right_front_paw",
    "left_hip", "left_knee", "left_back_paw",
    "right_hip", "right_knee", "right_back_paw",
]

QUADRUPED17_EDGES = [
    [0, 2], [1, 2], [2, 3], [3, 4],
    [3, 5], [5, 6], [6, 7],
    [3, 8], [8, 9], [9, 10],
    [4, 11], [11, 12], [12, 13],
    [4, 14], [14, 15], [15, 16],
]

DEFAULT_SKELETON = {"name": "quadruped17", "joints": QUADRUPED17_JOINTS, "edges": QUADRUPED17_EDGES}
