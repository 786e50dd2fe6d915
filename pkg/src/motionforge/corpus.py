"""The 12-scene fixture corpus: scripted scenes covering every pipeline
behavior (clean runs, each filter's trigger, shot cuts, stills, fades,
semantic rejects, articulated motion). Regenerate the JSON fixtures with
`mf synth corpus`.

Scenes are 224x120 at 10 fps and sized for a 52 px crop (low-res floor
52^2/4 = 676, at least 15% below every healthy actor's tight bbox area even
at fractional centers, while the scripted small actor falls to ~570). The overlap windows were
calibrated against the rasterizer: the standard actor pair crosses mask
IoU 0.1 between center distances 26 and 27 px.
"""

from __future__ import annotations

from pathlib import Path

from .config import Config
from .synth import ActorSpec, BackgroundSegment, NoiseSpec, SceneSpec

W, H = 224, 120
BG = [28, 64, 30]
RED = [208, 64, 44]
GREEN = [70, 205, 60]
TAN = [196, 150, 88]
CROP_SIZE = 52


def corpus_config(data_root: str = "mf_data") -> Config:
    """Pipeline config matched to the corpus scale."""
    cfg = Config()
    cfg.crop.size = CROP_SIZE
    cfg.store.data_root = data_root
    cfg.backends.backoff = 0.01
    # flat synthetic frames change far less per step than real video; the
    # still scene is exactly 0 while the slowest mover peaks at ~0.16
    cfg.shot.still_eps = 0.05
    return cfg


def _ellipse(actor_id, path, rx, ry, color, depth):
    return ActorSpec(actor_id=actor_id, shape="ellipse", color=color, depth=depth,
                     path=path, size=[[0, rx, ry]])


def build_scenes() -> list[SceneSpec]:
    scenes = []

    # 1. clean single actor spanning multiple tracking intervals
    scenes.append(SceneSpec(
        scene_id="s01_clean_single", duration=120, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[_ellipse("a0", [[0, 36, 60], [119, 176, 60]], 20, 14, RED, 0.5)]))

    # 2. two separated actors, ids persist across the interval boundary
    scenes.append(SceneSpec(
        scene_id="s02_two_actors", duration=100, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[
            _ellipse("a0", [[0, 30, 36], [99, 170, 36]], 20, 14, RED, 0.5),
            _ellipse("a1", [[0, 190, 86], [99, 60, 86]], 19, 13, GREEN, 0.6),
        ]))

    # 3. brief crossing: 3 overlapping frames (7..9) removed then refilled
    scenes.append(SceneSpec(
        scene_id="s03_overlap_refill", duration=70, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[
            _ellipse("a0", [[0, 80, 60]], 20, 14, RED, 0.5),
            _ellipse("a1", [[0, 158, 60], [8, 94, 60], [16, 158, 60], [69, 174, 60]],
                     17, 12, GREEN, 0.6),
        ]))

    # 4. held crossing: 6 overlapping frames (37..42) force a split
    scenes.append(SceneSpec(
        scene_id="s04_overlap_split", duration=80, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[
            _ellipse("a0", [[0, 80, 60]], 20, 14, RED, 0.5),
            _ellipse("a1", [[0, 190, 60], [29, 164, 60], [39, 84, 60], [40, 84, 60],
                            [50, 164, 60], [79, 190, 60]], 17, 12, GREEN, 0.6),
        ]))

    # 5. actor shrinks below the low-res floor at frame 50
    small = ActorSpec(actor_id="a0", shape="ellipse", color=RED, depth=0.5,
                      path=[[0, 70, 60], [69, 150, 60]],
                      size=[[0, 20, 14], [49, 20, 14], [50, 15, 10], [69, 15, 10]])
    scenes.append(SceneSpec(
        scene_id="s05_low_res", duration=70, width=W, height=H,
        background=[BackgroundSegment(0, BG)], actors=[small]))

    # 6. actor drifts into the border margin from frame ~54
    scenes.append(SceneSpec(
        scene_id="s06_border_touch", duration=70, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[_ellipse("a0", [[0, 60, 60], [69, 11.7, 60]], 20, 14, RED, 0.5)]))

    # 7. scripted tracker identity swap at frame 40
    scenes.append(SceneSpec(
        scene_id="s07_id_swap", duration=60, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        noise=NoiseSpec(id_swaps=[{"frame": 40, "a": "a0", "b": "a1"}]),
        actors=[
            _ellipse("a0", [[0, 60, 36], [59, 120, 36]], 20, 14, RED, 0.5),
            _ellipse("a1", [[0, 170, 86], [59, 110, 86]], 19, 13, GREEN, 0.6),
        ]))

    # 8. hard background cut at frame 40 splits the video into two clips
    scenes.append(SceneSpec(
        scene_id="s08_multi_shot", duration=80, width=W, height=H,
        background=[BackgroundSegment(0, BG), BackgroundSegment(40, [92, 34, 110])],
        actors=[_ellipse("a0", [[0, 40, 60], [79, 180, 60]], 20, 14, RED, 0.5)]))

    # 9. completely still: dropped by preprocessing
    scenes.append(SceneSpec(
        scene_id="s09_still", duration=60, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[_ellipse("a0", [[0, 112, 60]], 20, 14, RED, 0.5)]))

    # 10. gradual fade (no shot cut) while the track teleports: the
    # inconsistency cut drops everything from frame 45 on
    scenes.append(SceneSpec(
        scene_id="s10_fade_teleport", duration=80, width=W, height=H,
        background=[BackgroundSegment(0, BG), BackgroundSegment(40, [40, 40, 96], fade=14)],
        actors=[ActorSpec(actor_id="a0", shape="ellipse", color=RED, depth=0.5,
                          path=[[0, 50, 60], [44, 72, 60], [45, 150, 60], [79, 166, 60]],
                          size=[[0, 20, 14]])]))

    # 11. animal present but scored off-topic: semantic filter drops the clip
    scenes.append(SceneSpec(
        scene_id="s11_low_semantic", duration=60, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        noise=NoiseSpec(embed_cos_match=0.1),
        actors=[_ellipse("a0", [[0, 50, 60], [59, 160, 60]], 20, 14, RED, 0.5)]))

    # 12. walking quadruped for the keypoint metrics
    scenes.append(SceneSpec(
        scene_id="s12_quadruped", duration=60, width=W, height=H,
        background=[BackgroundSegment(0, BG)],
        actors=[ActorSpec(actor_id="q0", shape="quadruped", color=TAN, depth=0.5,
                          path=[[0, 50, 52], [59, 150, 52]],
                          size=[[0, 24, 9, 20]], gait_period=20, gait_amplitude=0.45)]))

    return scenes


def write_corpus(out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for spec in build_scenes():
        p = out / f"{spec.scene_id}.json"
        spec.save(p)
        paths.append(p)
    return paths
