"""Deterministic procedural scenes with exact ground truth.

A SceneSpec scripts background color segments (abrupt cuts or fades), moving
actors (ellipses or articulated capsule quadrupeds), and static rectangular
occluders, each with a scalar depth (larger = nearer). Rendering is purely
analytic: masks, boxes, keypoints, depth and flow all come from the script,
so pipeline output can be checked exactly. No randomness enters rendering;
the seed only drives the scripted-noise synthetic backends.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BBox, Keypoints, Mask

BACKGROUND_DEPTH = 0.0


@dataclass
class ActorSpec:
    actor_id: str
    shape: str  # "ellipse" | "quadruped"
    color: list[int]
    depth: float
    path: list[list[float]]  # [frame, x, y] keyframes, piecewise-linear
    size: list[list[float]]  # ellipse: [frame, rx, ry]; quadruped: [frame, body_len, body_r, leg_len]
    gait_period: float = 0.0  # frames per gait cycle; 0 = rigid
    gait_amplitude: float = 0.0  # leg swing, radians


@dataclass
class OccluderSpec:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    depth: float
    color: list[int]


@dataclass
class BackgroundSegment:
    start: int
    color: list[int]
    fade: int = 0  # >0: ramp linearly from the previous color over this many frames


@dataclass
class NoiseSpec:
    """Scripted imperfections for the synthetic backends."""

    box_jitter_sigma: float = 0.0
    detect_dropout: float = 0.0
    id_swaps: list[dict] = field(default_factory=list)  # {"frame": int, "a": id, "b": id}
    embed_cos_match: float = 0.4
    embed_cos_mismatch: float = 0.1
    image_check_answer: str = "yes"


@dataclass
class SceneSpec:
    scene_id: str
    duration: int
    width: int
    height: int
    fps: float = 10.0
    category: str = "horse"
    background: list[BackgroundSegment] = field(default_factory=lambda: [BackgroundSegment(0, [40, 90, 40])])
    actors: list[ActorSpec] = field(default_factory=list)
    occluders: list[OccluderSpec] = field(default_factory=list)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        d = json.loads(text)
        d["background"] = [BackgroundSegment(**s) for s in d.get("background", [])]
        d["actors"] = [ActorSpec(**a) for a in d.get("actors", [])]
        d["occluders"] = [OccluderSpec(**o) for o in d.get("occluders", [])]
        d["noise"] = NoiseSpec(**d.get("noise", {}))
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SceneSpec":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


@dataclass
class ActorFrameGT:
    mask: Mask  # visible (z-buffered) silhouette; drives depth/flow consistency
    full_mask: Mask  # the actor's whole on-canvas region, as an independent
    # per-object segmenter would report it (can overlap other actors)
    bbox: BBox  # tight box of full_mask
    keypoints: Keypoints
    center: tuple[float, float]
    velocity: tuple[float, float]  # center motion to the next frame; (0,0) on the last


@dataclass
class GroundTruth:
    cuts: list[int]
    depth: list[np.ndarray]  # (H, W) float32 per frame
    flow: list[np.ndarray]  # (H, W, 2) float32, frame t -> t+1
    actors: dict[str, dict[int, ActorFrameGT]]  # only frames where visibly present

    def boxes_at(self, frame: int) -> dict[str, BBox]:
        return {aid: per[frame].bbox for aid, per in self.actors.items() if frame in per}


@dataclass
class Rendered:
    spec: SceneSpec
    frames: list[np.ndarray]
    gt: GroundTruth


def _interp(keyframes: list[list[float]], t: float) -> np.ndarray:
    """Piecewise-linear interpolation over [frame, v...] rows, clamped at ends."""
    kf = np.asarray(keyframes, dtype=np.float64)
    times, values = kf[:, 0], kf[:, 1:]
    if t <= times[0]:
        return values[0]
    if t >= times[-1]:
        return values[-1]
    j = int(np.searchsorted(times, t, side="right"))
    # delta form: exact when the per-frame step is integral
    return values[j - 1] + (t - times[j - 1]) * (values[j] - values[j - 1]) / (times[j] - times[j - 1])


def _grid(width: int, height: int):
    ys, xs = np.mgrid[0:height, 0:width]
    return xs.astype(np.float64), ys.astype(np.float64)


def _ellipse_region(xs, ys, cx, cy, rx, ry):
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _capsule_region(xs, ys, p0, p1, r):
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    le2 = vx * vx + vy * vy
    if le2 == 0:
        return (xs - p0[0]) ** 2 + (ys - p0[1]) ** 2 <= r * r
    t = np.clip(((xs - p0[0]) * vx + (ys - p0[1]) * vy) / le2, 0.0, 1.0)
    dx = xs - (p0[0] + t * vx)
    dy = ys - (p0[1] + t * vy)
    return dx * dx + dy * dy <= r * r


def _background_color(spec: SceneSpec, t: int) -> np.ndarray:
    segs = sorted(spec.background, key=lambda s: s.start)
    color = np.array(segs[0].color, dtype=np.float64)
    for i, seg in enumerate(segs):
        if t < seg.start:
            break
        target = np.array(seg.color, dtype=np.float64)
        if seg.fade > 0 and i > 0:
            prev = np.array(segs[i - 1].color, dtype=np.float64)
            f = min((t - seg.start + 1) / seg.fade, 1.0)
            color = prev * (1 - f) + target * f
        else:
            color = target
    return np.clip(np.round(color), 0, 255).astype(np.uint8)


def scripted_cuts(spec: SceneSpec) -> list[int]:
    return sorted(s.start for s in spec.background if s.start > 0 and s.fade == 0)


class _ActorGeometry:
    """Per-frame analytic geometry of one actor."""

    def __init__(self, actor: ActorSpec, t: int):
        self.actor = actor
        pos = _interp(actor.path, t)
        self.cx, self.cy = float(pos[0]), float(pos[1])
        self.size = _interp(actor.size, t)
        self.t = t

    def region(self, xs, ys) -> np.ndarray:
        a = self.actor
        if a.shape == "ellipse":
            rx, ry = self.size
            return _ellipse_region(xs, ys, self.cx, self.cy, rx, ry)
        if a.shape == "quadruped":
            return self._quadruped_region(xs, ys)
        raise ValueError(f"unknown actor shape {a.shape!r}")

    def _leg_angles(self) -> list[float]:
        a = self.actor
        if a.gait_period <= 0 or a.gait_amplitude == 0:
            return [0.0, 0.0, 0.0, 0.0]
        phase = 2.0 * np.pi * self.t / a.gait_period
        # trot: diagonal pairs in phase
        return [
            a.gait_amplitude * np.sin(phase),
            a.gait_amplitude * np.sin(phase + np.pi),
            a.gait_amplitude * np.sin(phase + np.pi),
            a.gait_amplitude * np.sin(phase),
        ]

    def _quadruped_parts(self):
        body_len, body_r, leg_len = self.size
        cx, cy = self.cx, self.cy
        head_r = 0.6 * body_r
        head_c = (cx + body_len + 0.4 * head_r, cy - 0.55 * body_r)
        angles = self._leg_angles()
        legs = []
        for i, (ax_off, x_nudge) in enumerate([(0.65, -1.0), (0.65, 1.0), (-0.65, -1.0), (-0.65, 1.0)]):
            hip = (cx + ax_off * body_len + x_nudge, cy + 0.4 * body_r)
            alpha = angles[i]
            half = leg_len / 2.0
            knee = (hip[0] + half * np.sin(alpha), hip[1] + half * np.cos(alpha))
            foot = (knee[0] + half * np.sin(alpha * 1.5), knee[1] + half * np.cos(alpha * 1.5))
            legs.append((hip, knee, foot))
        return body_len, body_r, head_c, head_r, legs

    def _quadruped_region(self, xs, ys) -> np.ndarray:
        body_len, body_r, head_c, head_r, legs = self._quadruped_parts()
        cx, cy = self.cx, self.cy
        region = _capsule_region(xs, ys, (cx - body_len, cy), (cx + body_len, cy), body_r)
        region |= (xs - head_c[0]) ** 2 + (ys - head_c[1]) ** 2 <= head_r ** 2
        leg_r = max(1.5, 0.22 * body_r)
        for hip, knee, foot in legs:
            region |= _capsule_region(xs, ys, hip, knee, leg_r)
            region |= _capsule_region(xs, ys, knee, foot, leg_r)
        return region

    def keypoints(self) -> Keypoints:
        a = self.actor
        if a.shape == "ellipse":
            rx, ry = self.size
            ang = 2.0 * np.pi * np.arange(17) / 17.0
            pts = np.stack([
                self.cx + 0.6 * rx * np.cos(ang),
                self.cy + 0.6 * ry * np.sin(ang),
                np.ones(17),
            ], axis=1)
            return Keypoints(pts)
        body_len, body_r, head_c, head_r, legs = self._quadruped_parts()
        cx, cy = self.cx, self.cy
        (fl, fr, bl, br) = legs
        joints = [
            (head_c[0] - 0.3 * head_r, head_c[1] - 0.3 * head_r),  # left_eye
            (head_c[0] + 0.1 * head_r, head_c[1] - 0.3 * head_r),  # right_eye
            (head_c[0] + 0.7 * head_r, head_c[1] + 0.1 * head_r),  # nose
            (cx + 0.8 * body_len, cy - 0.8 * body_r),              # neck
            (cx - body_len, cy - 0.3 * body_r),                    # tail_base
            fl[0], fl[1], fl[2],                                   # left front leg
            fr[0], fr[1], fr[2],                                   # right front leg
            bl[0], bl[1], bl[2],                                   # left back leg
            br[0], br[1], br[2],                                   # right back leg
        ]
        pts = np.array([[x, y, 1.0] for x, y in joints], dtype=np.float64)
        return Keypoints(pts)


def render(spec: SceneSpec) -> Rendered:
    """Rasterize the scene and derive exact annotations."""
    xs, ys = _grid(spec.width, spec.height)
    frames: list[np.ndarray] = []
    depth_maps: list[np.ndarray] = []
    actors_gt: dict[str, dict[int, ActorFrameGT]] = {a.actor_id: {} for a in spec.actors}
    centers: dict[str, list[tuple[float, float]]] = {a.actor_id: [] for a in spec.actors}
    visible_masks: dict[str, list[np.ndarray | None]] = {a.actor_id: [] for a in spec.actors}

    for t in range(spec.duration):
        bg = _background_color(spec, t)
        image = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
        image[:] = bg
        depth = np.full((spec.height, spec.width), BACKGROUND_DEPTH, dtype=np.float64)
        winner = np.full((spec.height, spec.width), -1, dtype=np.int32)

        surfaces = []
        for occ in spec.occluders:
            region = (xs >= occ.x_min) & (xs < occ.x_max) & (ys >= occ.y_min) & (ys < occ.y_max)
            surfaces.append((occ.depth, region, np.array(occ.color, dtype=np.uint8), None))
        geoms: dict[str, _ActorGeometry] = {}
        for idx, actor in enumerate(spec.actors):
            g = _ActorGeometry(actor, t)
            geoms[actor.actor_id] = g
            surfaces.append((actor.depth, g.region(xs, ys), np.array(actor.color, dtype=np.uint8), actor.actor_id))

        order = sorted(range(len(surfaces)), key=lambda i: (surfaces[i][0], i))
        for i in order:
            z, region, color, aid = surfaces[i]
            paint = region & (z >= depth)
            image[paint] = color
            depth[paint] = z
            winner[paint] = i

        for i, (z, region, color, aid) in enumerate(surfaces):
            if aid is None:
                continue
            vis = winner == i
            visible_masks[aid].append(vis if vis.any() else None)
            g = geoms[aid]
            centers[aid].append((g.cx, g.cy))
            if vis.any():
                full = Mask(region)
                actors_gt[aid][t] = ActorFrameGT(
                    mask=Mask(vis), full_mask=full, bbox=full.tight_bbox(),
                    keypoints=g.keypoints(), center=(g.cx, g.cy), velocity=(0.0, 0.0),
                )

        frames.append(image)
        depth_maps.append(depth.astype(np.float32))

    flows: list[np.ndarray] = []
    for t in range(spec.duration - 1):
        flow = np.zeros((spec.height, spec.width, 2), dtype=np.float32)
        for aid in centers:
            if visible_masks[aid][t] is None:
                continue
            cx0, cy0 = centers[aid][t]
            cx1, cy1 = centers[aid][t + 1]
            vel = (cx1 - cx0, cy1 - cy0)
            flow[visible_masks[aid][t]] = vel
            if t in actors_gt[aid]:
                actors_gt[aid][t].velocity = vel
        flows.append(flow)

    return Rendered(spec=spec, frames=frames,
                    gt=GroundTruth(cuts=scripted_cuts(spec), depth=depth_maps,
                                   flow=flows, actors=actors_gt))


def flow_between(rendered: Rendered, t0: int, t1: int) -> np.ndarray:
    """Exact source-frame displacement field from frame t0 to t1: actor pixels
    carry their center motion, everything else is zero."""
    spec = rendered.spec
    flow = np.zeros((spec.height, spec.width, 2), dtype=np.float32)
    for aid, per in rendered.gt.actors.items():
        if t0 not in per:
            continue
        c0 = per[t0].center
        c1 = per[t1].center if t1 in per else _interp(
            next(a for a in spec.actors if a.actor_id == aid).path, t1)
        vel = (float(c1[0]) - c0[0], float(c1[1]) - c0[1])
        flow[per[t0].mask.bits.astype(bool)] = vel
    return flow


def write_scene_video(rendered: Rendered, out_dir) -> Path:
    """Persist the rendered frames as a frame-directory video."""
    from . import media

    out = Path(out_dir)
    media.write_frame_dir(out, rendered.frames, rendered.spec.fps,
                          meta={"category": rendered.spec.category,
                                "scene_id": rendered.spec.scene_id})
    return out
