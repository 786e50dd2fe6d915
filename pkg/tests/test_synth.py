import numpy as np
import pytest

from motionforge.synth import (
    ActorSpec,
    BackgroundSegment,
    NoiseSpec,
    OccluderSpec,
    SceneSpec,
    render,
)


def single_ellipse_scene(vx=0.0, vy=0.0, duration=12, **kw):
    return SceneSpec(
        scene_id="s1",
        duration=duration,
        width=96,
        height=72,
        actors=[ActorSpec(
            actor_id="a0", shape="ellipse", color=[200, 80, 60], depth=0.5,
            path=[[0, 40, 36], [duration - 1, 40 + vx * (duration - 1), 36 + vy * (duration - 1)]],
            size=[[0, 14, 10]],
        )],
        **kw,
    )


class TestRenderDeterminism:
    def test_static_scene_constant_frames_zero_flow_no_cuts(self):
        r = render(single_ellipse_scene())
        assert all(np.array_equal(f, r.frames[0]) for f in r.frames)
        assert all(not f.any() for f in r.gt.flow)
        assert r.gt.cuts == []

    def test_bit_deterministic(self):
        a = render(single_ellipse_scene(vx=1.5))
        b = render(single_ellipse_scene(vx=1.5))
        assert all(np.array_equal(x, y) for x, y in zip(a.frames, b.frames))
        for t in a.gt.actors["a0"]:
            assert a.gt.actors["a0"][t].mask == b.gt.actors["a0"][t].mask


class TestFlowConsistency:
    def test_translating_ellipse_flow_matches_velocity(self):
        r = render(single_ellipse_scene(vx=2.0))
        for t in range(len(r.gt.flow)):
            mask = r.gt.actors["a0"][t].mask.bits.astype(bool)
            assert np.allclose(r.gt.flow[t][mask], [2.0, 0.0])
            assert np.allclose(r.gt.flow[t][~mask], 0.0)

    def test_warping_mask_by_flow_reproduces_next_mask(self):
        # integer translation: warp must be exact
        r = render(single_ellipse_scene(vx=2.0, vy=1.0))
        for t in range(r.spec.duration - 1):
            m0 = r.gt.actors["a0"][t].mask.bits
            m1 = r.gt.actors["a0"][t + 1].mask.bits
            ys, xs = np.nonzero(m0)
            fl = r.gt.flow[t][ys, xs]
            warped = np.zeros_like(m1)
            warped[(ys + fl[:, 1].astype(int)) % m1.shape[0],
                   (xs + fl[:, 0].astype(int)) % m1.shape[1]] = 1
            assert np.array_equal(warped, m1)


class TestCutsAndBackground:
    def test_scripted_cut_index(self):
        spec = single_ellipse_scene(duration=70)
        spec.background = [
            BackgroundSegment(0, [200, 30, 30]),
            BackgroundSegment(30, [30, 30, 200]),
        ]
        r = render(spec)
        assert r.gt.cuts == [30]
        assert tuple(r.frames[29][0, 0]) == (200, 30, 30)
        assert tuple(r.frames[30][0, 0]) == (30, 30, 200)

    def test_fade_is_not_a_cut(self):
        spec = single_ellipse_scene(duration=40)
        spec.background = [
            BackgroundSegment(0, [200, 30, 30]),
            BackgroundSegment(20, [30, 30, 200], fade=10),
        ]
        r = render(spec)
        assert r.gt.cuts == []


class TestOcclusionAndDepth:
    def test_nearer_occluder_hides_actor(self):
        spec = single_ellipse_scene()
        spec.occluders = [OccluderSpec(x_min=0, y_min=0, x_max=40, y_max=72,
                                       depth=0.9, color=[10, 10, 10])]
        r = render(spec)
        m = r.gt.actors["a0"][0].mask.bits
        assert not m[:, :40].any()  # left part occluded
        assert m[:, 40:].any()

    def test_farther_occluder_does_not_hide(self):
        spec = single_ellipse_scene()
        spec.occluders = [OccluderSpec(x_min=0, y_min=0, x_max=40, y_max=72,
                                       depth=0.2, color=[10, 10, 10])]
        r = render(spec)
        full = render(single_ellipse_scene()).gt.actors["a0"][0].mask
        assert r.gt.actors["a0"][0].mask == full

    def test_depth_grid_layers(self):
        spec = single_ellipse_scene()
        spec.occluders = [OccluderSpec(x_min=0, y_min=0, x_max=10, y_max=10,
                                       depth=0.9, color=[0, 0, 0])]
        r = render(spec)
        d = r.gt.depth[0]
        assert d[0, 0] == pytest.approx(0.9)
        assert d[36, 40] == pytest.approx(0.5)  # actor center
        assert d[70, 90] == pytest.approx(0.0)  # background


class TestActors:
    def test_quadruped_has_17_joints_inside_canvas(self):
        spec = SceneSpec(
            scene_id="q", duration=8, width=160, height=120,
            actors=[ActorSpec(
                actor_id="q0", shape="quadruped", color=[150, 100, 60], depth=0.5,
                path=[[0, 70, 55], [7, 84, 55]],
                size=[[0, 28, 9, 22]],
                gait_period=8, gait_amplitude=0.5,
            )])
        r = render(spec)
        for t, gt in r.gt.actors["q0"].items():
            assert gt.keypoints.count == 17
            assert (gt.keypoints.xy[:, 0] >= 0).all()
            assert (gt.keypoints.xy[:, 0] < 160).all()
            assert gt.mask.area > 200

    def test_gait_moves_leg_joints(self):
        spec = SceneSpec(
            scene_id="q", duration=8, width=160, height=120,
            actors=[ActorSpec(
                actor_id="q0", shape="quadruped", color=[150, 100, 60], depth=0.5,
                path=[[0, 70, 55]], size=[[0, 28, 9, 22]],
                gait_period=8, gait_amplitude=0.5,
            )])
        r = render(spec)
        paw0 = r.gt.actors["q0"][0].keypoints.pts[7]
        paw2 = r.gt.actors["q0"][2].keypoints.pts[7]
        assert abs(paw0[0] - paw2[0]) > 1.0

    def test_size_schedule_shrinks_actor(self):
        spec = single_ellipse_scene(duration=10)
        spec.actors[0].size = [[0, 14, 10], [9, 5, 4]]
        r = render(spec)
        a0 = r.gt.actors["a0"][0].bbox.area
        a9 = r.gt.actors["a0"][9].bbox.area
        assert a9 < a0 / 3


class TestSpecSerialization:
    def test_json_round_trip(self):
        spec = single_ellipse_scene(vx=1.0)
        spec.noise = NoiseSpec(id_swaps=[{"frame": 4, "a": "a0", "b": "a1"}])
        back = SceneSpec.from_json(spec.to_json())
        assert back == spec
        assert render(back).gt.cuts == render(spec).gt.cuts
