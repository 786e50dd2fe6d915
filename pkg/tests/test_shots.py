import numpy as np
import pytest

from motionforge.backends import Gateway
from motionforge.geometry import Frame
from motionforge.shots import Clip, clip_semantic_score, detect_shots, mean_hsv_diff, split_and_filter

import oracles


def solid(color, h=8, w=8):
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = color
    return img


def frames_from(images, fps=10.0):
    return [Frame(index=i, timestamp=i / fps, image=im) for i, im in enumerate(images)]


class TestMeanHsvDiff:
    def test_identical_zero(self):
        f = Frame(0, 0.0, solid((10, 200, 30)))
        assert mean_hsv_diff(f, f) == 0.0

    def test_value_shift_ten_thirds(self):
        a = Frame(0, 0.0, solid((100, 100, 100)))
        b = Frame(1, 0.1, solid((110, 110, 110)))
        assert mean_hsv_diff(a, b) == pytest.approx(10 / 3, abs=1e-12)

    def test_random_frames_match_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        b = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        got = mean_hsv_diff(Frame(0, 0, a), Frame(1, 0.1, b))
        assert got == pytest.approx(oracles.brute_mean_hsv_diff(a.tolist(), b.tolist()), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mean_hsv_diff(Frame(0, 0, solid((0, 0, 0), 4, 4)),
                          Frame(1, 0.1, solid((0, 0, 0), 4, 5)))


class TestDetectShots:
    def test_constant_video_no_cuts(self):
        fs = frames_from([solid((50, 80, 90))] * 20)
        assert detect_shots(fs) == []

    def test_red_to_blue_cut_at_30(self):
        fs = frames_from([solid((200, 20, 20))] * 30 + [solid((20, 20, 200))] * 40)
        assert detect_shots(fs) == [30]

    def test_gradual_fade_below_threshold_missed(self):
        # documented limitation: per-step diff stays under the threshold
        images = []
        for i in range(40):
            v = int(round(i * 255 / 39))
            images.append(solid((v, v, v)))
        fs = frames_from(images)
        steps = [mean_hsv_diff(fs[i - 1], fs[i]) for i in range(1, 40)]
        assert max(steps) < 25
        assert detect_shots(fs) == []

    def test_invariant_to_constant_padding_except_shift(self):
        base = [solid((200, 20, 20))] * 10 + [solid((20, 20, 200))] * 10
        padded = [solid((200, 20, 20))] * 5 + base
        assert detect_shots(frames_from(base)) == [10]
        assert detect_shots(frames_from(padded)) == [15]


class TestSplitAndFilter:
    def moving_dot(self, n, h=16, w=16, color=(200, 30, 30)):
        images = []
        for i in range(n):
            img = solid((20, 60, 20), h, w)
            img[4:8, (i % 8) + 2 : (i % 8) + 6] = color
            images.append(img)
        return images

    def test_29_frame_video_discarded(self):
        clips = split_and_filter(frames_from(self.moving_dot(29)), source_fps=10)
        assert clips == []

    def test_30_frame_video_kept(self):
        clips = split_and_filter(frames_from(self.moving_dot(30)), source_fps=10)
        assert len(clips) == 1
        assert clips[0].n_frames == 30

    def test_still_video_dropped(self):
        fs = frames_from([solid((90, 90, 90), 16, 16)] * 100)
        assert split_and_filter(fs, source_fps=10) == []

    def test_90_frames_at_30fps_resamples_to_30(self):
        clips = split_and_filter(frames_from(self.moving_dot(90)), source_fps=30)
        assert len(clips) == 1
        clip = clips[0]
        assert clip.n_frames == 30
        assert clip.source_frames == [3 * k for k in range(30)]

    def test_resampled_timestamps_near_ideal_grid(self):
        clips = split_and_filter(frames_from(self.moving_dot(90)), source_fps=30)
        src_interval = 1 / 30
        for j, s in enumerate(clips[0].source_frames):
            ideal = j / 10
            assert abs(s / 30 - ideal) <= src_interval / 2 + 1e-9
        assert clips[0].source_frames == sorted(clips[0].source_frames)

    def moving_dot_on(self, n, bg):
        images = []
        for i in range(n):
            img = solid(bg, 16, 16)
            img[4:8, (i % 8) + 2 : (i % 8) + 6] = (200, 30, 30)
            images.append(img)
        return images

    def test_cut_splits_into_two_clips(self):
        images = self.moving_dot_on(40, (20, 60, 20)) + self.moving_dot_on(40, (120, 20, 200))
        fs = frames_from(images)
        clips = split_and_filter(fs, source_fps=10)
        assert len(clips) == 2
        assert (clips[0].source_start, clips[0].source_end) == (0, 40)
        assert (clips[1].source_start, clips[1].source_end) == (40, 80)

    def test_every_emitted_clip_meets_contract(self):
        clips = split_and_filter(frames_from(self.moving_dot(64)), source_fps=10,
                                 min_len=30, still_eps=0.5)
        for c in clips:
            assert c.n_frames >= 30
            diffs = [mean_hsv_diff(c.frames[i - 1], c.frames[i]) for i in range(1, c.n_frames)]
            assert any(d >= 0.5 for d in diffs)


class _ScriptedEmbed:
    """Image embeddings with scripted cosines against the text embedding."""

    def __init__(self, cosines):
        self.cosines = list(cosines)
        self.calls = 0
        rng = np.random.default_rng(0)
        self.text_vec = rng.standard_normal(16)
        self.text_vec /= np.linalg.norm(self.text_vec)
        w = rng.standard_normal(16)
        w -= (w @ self.text_vec) * self.text_vec
        self.orth = w / np.linalg.norm(w)

    def embed_text(self, text, meta):
        return self.text_vec.astype(np.float32)

    def embed_image(self, image, grid, patch, meta):
        cos = self.cosines[self.calls % len(self.cosines)]
        self.calls += 1
        v = cos * self.text_vec + np.sqrt(max(1 - cos * cos, 0)) * self.orth
        return v.astype(np.float32)


def _clip(n=12):
    imgs = [np.full((8, 8, 3), i, dtype=np.uint8) for i in range(n)]
    return Clip(source_start=0, source_end=n, source_frames=list(range(n)),
                frames=frames_from(imgs))


class TestSemanticScore:
    def _gateway(self, cosines):
        be = _ScriptedEmbed(cosines)
        return Gateway({"embed_image": be, "embed_text": be}, backoff=0.001)

    def test_perfect_match_scores_max(self):
        score = clip_semantic_score(_clip(), "horse", self._gateway([1.0]), n_samples=4)
        assert score == pytest.approx(2.5, abs=1e-6)

    def test_negative_cosine_clamped(self):
        score = clip_semantic_score(_clip(), "horse", self._gateway([-0.2]), n_samples=4)
        assert score == 0.0

    def test_two_sample_mean(self):
        score = clip_semantic_score(_clip(), "horse", self._gateway([0.4, 0.2]), n_samples=2)
        assert score == pytest.approx(0.75, abs=1e-6)

    def test_seeded_sampling_reproducible(self):
        gw = self._gateway([0.9, 0.1, 0.5, 0.3])
        a = clip_semantic_score(_clip(), "horse", gw, n_samples=3, seed=5)
        gw2 = self._gateway([0.9, 0.1, 0.5, 0.3])
        b = clip_semantic_score(_clip(), "horse", gw2, n_samples=3, seed=5)
        assert a == b

    def test_empty_clip_rejected(self):
        with pytest.raises(ValueError):
            clip_semantic_score(Clip(0, 0), "horse", self._gateway([1.0]))
