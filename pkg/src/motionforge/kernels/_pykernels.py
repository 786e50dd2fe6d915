"""NumPy/SciPy implementations of the hot per-pixel kernels.

Selected at import time when the compiled extension is unavailable (or when
forced via MOTIONFORGE_KERNELS=py). Must stay numerically identical to
``_ckernels``: same HSV formulation, same tie-breaking, double precision.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

NAME = "numpy"


def dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a Chebyshev disc (square of side 2*radius+1)."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    out = ndimage.maximum_filter(bits.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0)
    return out.astype(np.uint8)


def erode(bits: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a Chebyshev disc; cells beyond the border count as unset."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    out = ndimage.minimum_filter(bits.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0)
    return out.astype(np.uint8)


def boundary(bits: np.ndarray) -> np.ndarray:
    """Set cells with at least one unset 4-neighbor, counting the image edge as unset."""
    b = bits.astype(bool)
    interior = np.zeros_like(b)
    if b.shape[0] > 2 and b.shape[1] > 2:
        interior[1:-1, 1:-1] = (
            b[1:-1, 1:-1] & b[:-2, 1:-1] & b[2:, 1:-1] & b[1:-1, :-2] & b[1:-1, 2:]
        )
    return (b & ~interior).astype(np.uint8)


def _hsv_channels(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """8-bit-scale HSV: H in [0,256) (circular), S and V in [0,255]."""
    rgb = img.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = v - mn
    s = np.where(v > 0, delta * 255.0 / np.where(v > 0, v, 1.0), 0.0)
    hp = np.zeros_like(v)
    nz = delta > 0
    dm = np.where(nz, delta, 1.0)
    is_r = nz & (v == r)
    is_g = nz & ~is_r & (v == g)
    is_b = nz & ~is_r & ~is_g
    hp = np.where(is_r, ((g - b) / dm) % 6.0, hp)
    hp = np.where(is_g, (b - r) / dm + 2.0, hp)
    hp = np.where(is_b, (r - g) / dm + 4.0, hp)
    h = hp * 60.0 * (256.0 / 360.0)
    return h, s, v


def mean_hsv_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over pixels of the mean absolute per-channel HSV difference.

    Hue differences are circular: min(|dh|, 256-|dh|).
    """
    if a.shape != b.shape:
        raise ValueError(f"frame shape mismatch: {a.shape} vs {b.shape}")
    h1, s1, v1 = _hsv_channels(a)
    h2, s2, v2 = _hsv_channels(b)
    dh = np.abs(h1 - h2)
    dh = np.minimum(dh, 256.0 - dh)
    per_pixel = (dh + np.abs(s1 - s2) + np.abs(v1 - v2)) / 3.0
    return float(per_pixel.mean())


def nearest_depth_delta(
    pts: np.ndarray, outer: np.ndarray, inner: np.ndarray, depth: np.ndarray
) -> np.ndarray:
    """depth at nearest outer point minus depth at nearest inner point, per query point.

    Points are (row, col) int arrays. Nearest by squared Euclidean distance;
    ties resolve to the earliest point in the candidate array (callers pass
    candidates in row-major order, so this is deterministic).
    """
    pts = np.asarray(pts, dtype=np.int64)
    d = np.asarray(depth, dtype=np.float64)
    out = np.empty(len(pts), dtype=np.float64)
    d_outer = _nearest_depth(pts, np.asarray(outer, dtype=np.int64), d)
    d_inner = _nearest_depth(pts, np.asarray(inner, dtype=np.int64), d)
    out = d_outer - d_inner
    return out


def _nearest_depth(pts: np.ndarray, cands: np.ndarray, depth: np.ndarray) -> np.ndarray:
    if len(cands) == 0:
        raise ValueError("empty candidate set")
    vals = depth[cands[:, 0], cands[:, 1]]
    out = np.empty(len(pts), dtype=np.float64)
    # chunked to bound the N x M distance matrix
    chunk = max(1, int(4_000_000 // max(len(cands), 1)))
    for lo in range(0, len(pts), chunk):
        p = pts[lo : lo + chunk]
        dy = p[:, 0:1] - cands[None, :, 0]
        dx = p[:, 1:2] - cands[None, :, 1]
        idx = np.argmin(dy * dy + dx * dx, axis=1)
        out[lo : lo + chunk] = vals[idx]
    return out
