"""Stage 4: per-track keypoints, depth, flow and feature grids via backends,
plus the occlusion-boundary computation and track summary statistics.

Flow grids are persisted in crop space exactly as the backend returned them;
the mean-flow summary converts vectors back to source-frame pixels through
the recorded crop windows first, so it measures real subject motion rather
than the crop-stabilized residual.

Persistence is atomic: everything lands in a staging directory that is
renamed to <track>/features only after every frame succeeded.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from . import kernels, media, metrics
from .backends.gateway import Gateway
from .backends.protocol import RequestMeta
from .geometry import Keypoints, Mask, boundary_points
from .tracking import CropWindow, load_crop_windows

log = logging.getLogger(__name__)

DEFAULT_MORPH_RADIUS = 3
DEFAULT_OCCLUSION_TAU = 0.05
DEFAULT_GRID_PATCH = 14


@dataclass
class OcclusionMap:
    """Per-boundary-pixel occlusion classification for one frame."""

    pixels: list[tuple[int, int, float, bool]]  # (x, y, delta, occluded)
    fraction: float
    degenerate: bool = False


@dataclass
class FeatureSet:
    frames: list[int]
    keypoints: list[Keypoints]
    depth: list[np.ndarray] = field(repr=False, default_factory=list)
    flow: list[np.ndarray] = field(repr=False, default_factory=list)  # len = frames-1
    feat: list[np.ndarray] = field(repr=False, default_factory=list)
    occlusion: list[OcclusionMap] = field(default_factory=list)
    mean_occlusion: float = 0.0
    mean_flow: float = 0.0
    temporal_roughness: float = 0.0


def occlusion_boundary(mask: Mask, depth: np.ndarray, radius: int = DEFAULT_MORPH_RADIUS,
                       tau: float = DEFAULT_OCCLUSION_TAU) -> OcclusionMap:
    """Classify each mask-boundary pixel by the depth difference between its
    nearest pixel on the dilated boundary and on the eroded boundary.

    Positive delta beyond tau means the outside is nearer than the inside
    (larger depth = nearer), i.e. an occluder touches the silhouette there.
    """
    if depth.shape != (mask.height, mask.width):
        raise ValueError(f"depth {depth.shape} != mask {(mask.height, mask.width)}")
    pts = boundary_points(mask)
    if len(pts) == 0:
        return OcclusionMap(pixels=[], fraction=0.0, degenerate=True)
    outer = np.argwhere(kernels.boundary(kernels.dilate(mask.bits, radius)) > 0)
    inner = np.argwhere(kernels.boundary(kernels.erode(mask.bits, radius)) > 0)
    degenerate = len(inner) == 0
    if degenerate:
        # eroded mask vanished: fall back to the pixel's own depth as the
        # inside reference (nearest point of pts to itself is itself)
        inner = pts
    deltas = kernels.nearest_depth_delta(pts, outer, inner, depth)
    occluded = deltas > tau
    pixels = [(int(x), int(y), float(d), bool(o))
              for (y, x), d, o in zip(pts, deltas, occluded)]
    return OcclusionMap(pixels=pixels, fraction=float(occluded.mean()),
                        degenerate=degenerate)


def mean_flow_magnitude(flow_grids: list[np.ndarray], masks: list[Mask]) -> float:
    """Mean Euclidean flow norm over foreground cells, averaged over frames."""
    per_frame = []
    for flow, mask in zip(flow_grids, masks):
        if flow.shape[:2] != (mask.height, mask.width):
            raise ValueError(f"flow {flow.shape} misaligned with mask "
                             f"{(mask.height, mask.width)}")
        fg = mask.bits.astype(bool)
        if not fg.any():
            continue
        per_frame.append(float(np.linalg.norm(flow[fg], axis=1).mean()))
    return float(np.mean(per_frame)) if per_frame else 0.0


def crop_flow_to_frame(flow: np.ndarray, win: CropWindow, win_next: CropWindow) -> np.ndarray:
    """Convert crop-space flow vectors to source-frame pixels.

    A crop pixel u maps to frame point p; its flow lands on crop point u+f in
    the next frame's window. Mapping both ends to frame space gives the true
    displacement even when the window moved or rescaled.
    """
    out = flow.shape[0]
    s0 = win.rect[2] / out
    s1 = win_next.rect[2] / out
    us = np.arange(out, dtype=np.float64)
    uu, vv = np.meshgrid(us, us, indexing="xy")
    px = win.rect[0] + (uu + 0.5) * s0
    py = win.rect[1] + (vv + 0.5) * s0
    qx = win_next.rect[0] + (uu + flow[:, :, 0] + 0.5) * s1
    qy = win_next.rect[1] + (vv + flow[:, :, 1] + 0.5) * s1
    return np.stack([qx - px, qy - py], axis=-1).astype(np.float32)


# -- binary grid files ------------------------------------------------------

def write_grid_bin(path, arr: np.ndarray) -> None:
    """Length-prefixed JSON header then row-major little-endian float32."""
    a = np.asarray(arr, dtype="<f4")
    if a.ndim == 2:
        a = a[:, :, None]
    header = json.dumps({"width": a.shape[1], "height": a.shape[0],
                         "channels": a.shape[2], "dtype": "<f4"}).encode()
    with open(path, "wb") as f:
        f.write(np.uint32(len(header)).astype("<u4").tobytes())
        f.write(header)
        f.write(np.ascontiguousarray(a).tobytes())


def read_grid_bin(path) -> np.ndarray:
    with open(path, "rb") as f:
        n = int(np.frombuffer(f.read(4), dtype="<u4")[0])
        header = json.loads(f.read(n).decode())
        data = np.frombuffer(f.read(), dtype="<f4")
    h, w, c = header["height"], header["width"], header["channels"]
    if data.size != h * w * c:
        raise ValueError(f"grid file {path} truncated: {data.size} != {h * w * c}")
    arr = data.reshape(h, w, c)
    return arr[:, :, 0] if c == 1 else arr


def write_depth_png(path, depth: np.ndarray) -> tuple[float, float]:
    """16-bit grayscale PNG of the per-frame normalized depth; returns (min, max)."""
    dmin, dmax = float(depth.min()), float(depth.max())
    if dmax > dmin:
        norm = (depth - dmin) / (dmax - dmin)
    else:
        norm = np.zeros_like(depth)
    cv2.imwrite(str(path), np.round(norm * 65535).astype(np.uint16))
    return dmin, dmax


def read_depth_png(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"failed to read {path}")
    return img.astype(np.float32) / 65535.0


# -- extraction --------------------------------------------------------------

def extract_features(track_dir, video_id: str, category: str,
                     clip_source_frames: list[int], gateway: Gateway,
                     morph_radius: int = DEFAULT_MORPH_RADIUS,
                     tau: float = DEFAULT_OCCLUSION_TAU,
                     grid_patch: int = DEFAULT_GRID_PATCH,
                     with_feature_grids: bool = True) -> FeatureSet:
    """Run the per-frame backends over a cropped track and persist the result.

    clip_source_frames maps clip-frame index -> source-frame index so backend
    meta can address the original video frames.
    """
    track_dir = Path(track_dir)
    windows = load_crop_windows(track_dir)
    frames = [w.frame for w in windows]
    rgbs = [media.read_png(track_dir / "rgb" / f"{f:06d}.png") for f in frames]
    masks = [Mask.load_png(track_dir / "mask" / f"{f:06d}.png") for f in frames]

    def meta_for(i: int, flow_to: int | None = None) -> RequestMeta:
        src = clip_source_frames[frames[i]]
        m = RequestMeta(video_id=video_id, category=category, frame_index=src,
                        crop=[*windows[i].rect], track_id=track_dir.name)
        if flow_to is not None:
            m.frame_indices = [src, clip_source_frames[frames[flow_to]]]
            m.crop_next = [*windows[flow_to].rect]
        return m

    fs = FeatureSet(frames=frames, keypoints=[])
    for i in range(len(frames)):
        fs.keypoints.append(gateway.keypoints(rgbs[i], meta_for(i)))
        raw_depth = gateway.depth(rgbs[i], meta_for(i))
        dmin, dmax = float(raw_depth.min()), float(raw_depth.max())
        norm = (raw_depth - dmin) / (dmax - dmin) if dmax > dmin else np.zeros_like(raw_depth)
        fs.depth.append(raw_depth)
        fs.occlusion.append(occlusion_boundary(masks[i], norm, morph_radius, tau))
        if with_feature_grids:
            fs.feat.append(gateway.embed_image(rgbs[i], meta_for(i),
                                               grid=True, patch=grid_patch))
    for i in range(len(frames) - 1):
        fs.flow.append(gateway.flow(rgbs[i], rgbs[i + 1], meta_for(i, flow_to=i + 1)))

    frame_flows = [crop_flow_to_frame(fl, windows[i], windows[i + 1])
                   for i, fl in enumerate(fs.flow)]
    fs.mean_flow = mean_flow_magnitude(frame_flows, masks[:-1])
    fs.mean_occlusion = float(np.mean([o.fraction for o in fs.occlusion])) if fs.occlusion else 0.0
    kp_xy = np.stack([k.xy for k in fs.keypoints])  # (T, K, 2)
    fs.temporal_roughness = float(sum(
        metrics.temporal_roughness(kp_xy[:, j, :]) for j in range(kp_xy.shape[1])))

    _persist(track_dir, fs, tau, morph_radius)
    return fs


def _persist(track_dir: Path, fs: FeatureSet, tau: float, radius: int) -> None:
    staging = track_dir / f".features-tmp-{os.getpid()}"
    final = track_dir / "features"
    if staging.exists():
        shutil.rmtree(staging)
    try:
        for sub in ("kp", "depth", "flow", "feat"):
            (staging / sub).mkdir(parents=True)
        depth_meta = {}
        for i, f in enumerate(fs.frames):
            fs.keypoints[i].save(staging / "kp" / f"{f:06d}.json")
            dmin, dmax = write_depth_png(staging / "depth" / f"{f:06d}.png", fs.depth[i])
            depth_meta[f"{f:06d}"] = {"min": dmin, "max": dmax}
            if fs.feat:
                write_grid_bin(staging / "feat" / f"{f:06d}.bin", fs.feat[i])
        for i, f in enumerate(fs.frames[:-1]):
            write_grid_bin(staging / "flow" / f"{f:06d}.bin", fs.flow[i])
        (staging / "depth_meta.json").write_text(json.dumps(depth_meta, indent=1))
        (staging / "occlusion.json").write_text(json.dumps({
            "tau": tau, "radius": radius,
            "frames": {
                f"{f:06d}": {"fraction": o.fraction, "degenerate": o.degenerate,
                             "pixels": [[x, y, d, int(occ)] for x, y, d, occ in o.pixels]}
                for f, o in zip(fs.frames, fs.occlusion)
            },
        }))
        (staging / "summary.json").write_text(json.dumps({
            "mean_occlusion": fs.mean_occlusion,
            "mean_flow": fs.mean_flow,
            "temporal_roughness": fs.temporal_roughness,
            "n_frames": len(fs.frames),
        }, indent=1))
        if final.exists():
            shutil.rmtree(final)
        staging.rename(final)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def features_complete(track_dir) -> bool:
    """All feature files present and internally consistent."""
    final = Path(track_dir) / "features"
    if not (final / "summary.json").exists():
        return False
    try:
        summary = json.loads((final / "summary.json").read_text())
        n = summary["n_frames"]
        kp = sorted((final / "kp").glob("*.json"))
        depth = sorted((final / "depth").glob("*.png"))
        flow = sorted((final / "flow").glob("*.bin"))
        return len(kp) == n and len(depth) == n and len(flow) == max(n - 1, 0)
    except (KeyError, ValueError, OSError):
        return False


def load_summary(track_dir) -> dict:
    return json.loads((Path(track_dir) / "features" / "summary.json").read_text())
