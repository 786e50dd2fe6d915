import json

import numpy as np
import pytest

from motionforge import kernels
from motionforge.backends import Gateway, RetriableBackendError, SyntheticBackends
from motionforge.features import (
    crop_flow_to_frame,
    extract_features,
    features_complete,
    mean_flow_magnitude,
    occlusion_boundary,
    read_depth_png,
    read_grid_bin,
    write_depth_png,
    write_grid_bin,
)
from motionforge.geometry import Mask, boundary_points
from motionforge.synth import ActorSpec, OccluderSpec, SceneSpec, render
from motionforge.tracking import (
    Track,
    TrackDetection,
    compute_crop_windows,
    render_crops,
    save_track,
)

import oracles


def disc_mask(h, w, cy, cx, r):
    ys, xs = np.mgrid[0:h, 0:w]
    return Mask((ys - cy) ** 2 + (xs - cx) ** 2 <= r * r)


class TestOcclusionBoundary:
    def test_uniform_depth_all_deltas_zero(self):
        m = disc_mask(32, 32, 16, 16, 8)
        out = occlusion_boundary(m, np.full((32, 32), 0.7, dtype=np.float32))
        assert out.fraction == 0.0
        assert all(d == 0.0 for _, _, d, _ in out.pixels)

    def test_occluder_behind_gives_zero_fraction(self):
        m = disc_mask(32, 32, 16, 16, 8)
        depth = np.full((32, 32), 0.2, dtype=np.float32)  # background
        depth[m.bits.astype(bool)] = 0.5  # animal
        depth[:, :6] = 0.3  # "occluder" farther than the animal
        out = occlusion_boundary(m, depth, radius=2, tau=0.05)
        assert out.fraction == 0.0

    def test_fraction_monotone_in_tau(self):
        rng = np.random.default_rng(4)
        m = disc_mask(32, 32, 16, 16, 9)
        depth = rng.random((32, 32)).astype(np.float32)
        fracs = [occlusion_boundary(m, depth, tau=t).fraction
                 for t in (0.0, 0.1, 0.3, 0.7)]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))

    def test_matches_brute_force_oracle_64x64(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            m = disc_mask(64, 64, 32, 30 + rng.integers(0, 4), 12 + rng.integers(0, 6))
            depth = rng.random((64, 64))
            radius = 3
            out = occlusion_boundary(m, depth, radius=radius, tau=0.05)
            pts = boundary_points(m).tolist()
            outer = np.argwhere(kernels.boundary(kernels.dilate(m.bits, radius)) > 0).tolist()
            inner = np.argwhere(kernels.boundary(kernels.erode(m.bits, radius)) > 0).tolist()
            expect = oracles.brute_nearest_delta(pts, outer, inner, depth)
            got = [d for _, _, d, _ in out.pixels]
            assert np.allclose(got, expect, atol=0)
            expect_frac = float(np.mean([d > 0.05 for d in expect]))
            assert out.fraction == pytest.approx(expect_frac, abs=1e-12)

    def test_empty_mask_degenerate(self):
        out = occlusion_boundary(Mask.zeros(16, 16), np.zeros((16, 16), np.float32))
        assert out.fraction == 0.0
        assert out.degenerate

    def test_thin_mask_degenerate_uses_own_depth(self):
        bits = np.zeros((16, 16), dtype=np.uint8)
        bits[8, 2:14] = 1  # 1px line: erosion empties it
        depth = np.full((16, 16), 0.2, dtype=np.float32)
        depth[8, 2:14] = 0.5
        depth[:8, :8] = 0.9  # near occluder just above the line's left half
        out = occlusion_boundary(Mask(bits), depth, radius=1, tau=0.05)
        assert out.degenerate
        assert 0.0 < out.fraction < 1.0

    def test_mask_depth_mismatch_raises(self):
        with pytest.raises(ValueError):
            occlusion_boundary(Mask.zeros(8, 8), np.zeros((9, 8), np.float32))


class TestMeanFlow:
    def test_zero_flow(self):
        m = disc_mask(16, 16, 8, 8, 4)
        assert mean_flow_magnitude([np.zeros((16, 16, 2), np.float32)], [m]) == 0.0

    def test_uniform_3_4_gives_5(self):
        m = disc_mask(16, 16, 8, 8, 4)
        flow = np.zeros((16, 16, 2), np.float32)
        flow[:, :] = (3.0, 4.0)
        assert mean_flow_magnitude([flow], [m]) == pytest.approx(5.0)

    def test_misaligned_raises(self):
        with pytest.raises(ValueError):
            mean_flow_magnitude([np.zeros((8, 8, 2), np.float32)], [Mask.zeros(9, 9)])

    def test_crop_flow_frame_conversion_identity_windows(self):
        from motionforge.tracking import CropWindow

        win = CropWindow(frame=0, center=(16, 16), side=32.0, rect=(0, 0, 32), out_size=32)
        flow = np.full((32, 32, 2), 2.0, dtype=np.float32)
        back = crop_flow_to_frame(flow, win, win)
        assert np.allclose(back, 2.0)

    def test_crop_flow_accounts_for_window_motion(self):
        from motionforge.tracking import CropWindow

        # window follows the object exactly: crop flow 0, frame flow = window step
        w0 = CropWindow(frame=0, center=(16, 16), side=32.0, rect=(0, 0, 32), out_size=32)
        w1 = CropWindow(frame=1, center=(18, 16), side=32.0, rect=(2, 0, 32), out_size=32)
        back = crop_flow_to_frame(np.zeros((32, 32, 2), np.float32), w0, w1)
        assert np.allclose(back[:, :, 0], 2.0)
        assert np.allclose(back[:, :, 1], 0.0)


class TestGridFiles:
    def test_grid_bin_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        for shape in ((7, 5), (6, 4, 2), (3, 3, 8)):
            arr = rng.standard_normal(shape).astype(np.float32)
            p = tmp_path / "g.bin"
            write_grid_bin(p, arr)
            back = read_grid_bin(p)
            assert np.array_equal(back, arr if arr.ndim > 2 else arr)

    def test_grid_bin_header_layout(self, tmp_path):
        p = tmp_path / "g.bin"
        write_grid_bin(p, np.zeros((2, 3, 2), np.float32))
        raw = p.read_bytes()
        n = int.from_bytes(raw[:4], "little")
        header = json.loads(raw[4 : 4 + n])
        assert header == {"width": 3, "height": 2, "channels": 2, "dtype": "<f4"}
        assert len(raw) == 4 + n + 2 * 3 * 2 * 4

    def test_depth_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        depth = rng.uniform(-3, 9, (12, 10)).astype(np.float32)
        p = tmp_path / "d.png"
        dmin, dmax = write_depth_png(p, depth)
        norm = read_depth_png(p)
        assert norm.min() >= 0 and norm.max() <= 1
        restored = norm * (dmax - dmin) + dmin
        assert np.allclose(restored, depth, atol=(dmax - dmin) / 65535)


def tracked_scene(duration=20, vx=2.0):
    # the occluder band at the top clips the actor's upper edge in every frame,
    # so occlusion stays visible inside the smoothed crop windows
    spec = SceneSpec(
        scene_id="feat0", duration=duration, width=160, height=120, category="horse",
        actors=[ActorSpec(actor_id="a0", shape="ellipse", color=[200, 70, 50], depth=0.5,
                          path=[[0, 40, 60], [duration - 1, 40 + vx * (duration - 1), 60]],
                          size=[[0, 15, 11]])],
        occluders=[OccluderSpec(x_min=0, y_min=0, x_max=160, y_max=53,
                                depth=0.9, color=[30, 30, 30])])
    return render(spec)


def build_track_dir(rendered, tmp_path, crop_size=64):
    dets = [TrackDetection(frame=f, box=g.bbox, mask=g.mask)
            for f, g in sorted(rendered.gt.actors["a0"].items())]
    tr = Track("feat0-c00-t00", "feat0-c00", dets)
    windows = compute_crop_windows(tr, crop_size=crop_size)
    rgbs, masks = render_crops(tr, rendered.frames, windows)
    return save_track(tmp_path / "tracks" / tr.track_id, tr, windows, rgbs, masks), tr


def make_gateway(rendered):
    synth = SyntheticBackends({rendered.spec.scene_id: rendered})
    return Gateway({k: synth for k in ("keypoints", "depth", "flow", "embed_image")},
                   backoff=0.001)


class TestExtractFeatures:
    def test_shapes_and_counts(self, tmp_path):
        r = tracked_scene()
        track_dir, tr = build_track_dir(r, tmp_path)
        fs = extract_features(track_dir, "feat0", "horse", list(range(20)),
                              make_gateway(r))
        assert len(fs.keypoints) == 20
        assert len(fs.depth) == 20
        assert len(fs.flow) == 19
        assert len(fs.feat) == 20
        assert fs.feat[0].shape[:2] == (64 // 14, 64 // 14)
        assert features_complete(track_dir)

    def test_keypoints_match_gt_in_crop_space(self, tmp_path):
        r = tracked_scene()
        track_dir, tr = build_track_dir(r, tmp_path)
        fs = extract_features(track_dir, "feat0", "horse", list(range(20)),
                              make_gateway(r))
        from motionforge.tracking import load_crop_windows

        windows = load_crop_windows(track_dir)
        for i, win in enumerate(windows):
            gt = r.gt.actors["a0"][win.frame].keypoints
            x0, y0, side = win.rect
            expect = (gt.xy - [x0, y0]) * (win.out_size / side)
            assert np.allclose(fs.keypoints[i].xy, expect, atol=1e-6)

    def test_translating_object_mean_flow_near_2(self, tmp_path):
        r = tracked_scene(vx=2.0)
        track_dir, _ = build_track_dir(r, tmp_path)
        fs = extract_features(track_dir, "feat0", "horse", list(range(20)),
                              make_gateway(r))
        assert fs.mean_flow == pytest.approx(2.0, abs=0.1)

    def test_occlusion_summary_positive_with_near_occluder(self, tmp_path):
        r = tracked_scene()
        track_dir, _ = build_track_dir(r, tmp_path)
        fs = extract_features(track_dir, "feat0", "horse", list(range(20)),
                              make_gateway(r))
        assert 0.0 < fs.mean_occlusion < 1.0

    def test_backend_failure_leaves_no_partial_files(self, tmp_path):
        r = tracked_scene()
        track_dir, _ = build_track_dir(r, tmp_path)

        class FlakyDepth:
            def __init__(self, inner):
                self.inner = inner
                self.calls = 0

            def depth(self, image, meta):
                self.calls += 1
                if self.calls > 5:
                    raise RetriableBackendError("backend down")
                return self.inner.depth(image, meta)

        synth = SyntheticBackends({"feat0": r})
        gw = Gateway({"keypoints": synth, "depth": FlakyDepth(synth),
                      "flow": synth, "embed_image": synth}, retries=2, backoff=0.001)
        with pytest.raises(RetriableBackendError):
            extract_features(track_dir, "feat0", "horse", list(range(20)), gw)
        assert not (track_dir / "features").exists()
        assert not any(track_dir.glob(".features-tmp-*"))
        assert not features_complete(track_dir)
