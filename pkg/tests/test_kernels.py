"""Cross-checks of the compiled and NumPy kernel implementations,
plus oracle agreement for the HSV difference and nearest-depth search."""

import numpy as np
import pytest

from motionforge.kernels import _pykernels

import oracles

try:
    from motionforge.kernels import _ckernels
    IMPLS = [_pykernels, _ckernels]
except ImportError:  # compiled extension unavailable
    IMPLS = [_pykernels]


@pytest.fixture(params=IMPLS, ids=lambda m: m.NAME)
def impl(request):
    return request.param


def test_backend_reports_name():
    from motionforge import kernels
    assert kernels.backend_name() in ("cython", "numpy")


class TestHsvDiff:
    def test_identical_frames_zero(self, impl):
        rng = np.random.default_rng(0)
        f = rng.integers(0, 256, (12, 9, 3), dtype=np.uint8)
        assert impl.mean_hsv_diff(f, f) == 0.0

    def test_value_shift_closed_form(self, impl):
        # gray frames differing only in V by 10 -> mean channel diff 10/3
        a = np.full((8, 8, 3), 100, dtype=np.uint8)
        b = np.full((8, 8, 3), 110, dtype=np.uint8)
        assert impl.mean_hsv_diff(a, b) == pytest.approx(10 / 3, abs=1e-12)

    def test_random_frames_match_per_pixel_oracle(self, impl):
        rng = np.random.default_rng(5)
        for _ in range(5):
            a = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
            b = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
            expect = oracles.brute_mean_hsv_diff(a.tolist(), b.tolist())
            assert impl.mean_hsv_diff(a, b) == pytest.approx(expect, abs=1e-9)

    def test_dimension_mismatch_raises(self, impl):
        with pytest.raises(ValueError):
            impl.mean_hsv_diff(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 5, 3), np.uint8))

    def test_hue_wraparound_is_circular(self, impl):
        # hues just either side of the wrap point differ by a small circular amount
        a = np.zeros((1, 1, 3), dtype=np.uint8)
        b = np.zeros((1, 1, 3), dtype=np.uint8)
        a[0, 0] = (255, 0, 10)   # hue slightly below 256
        b[0, 0] = (255, 10, 0)   # hue slightly above 0
        direct = impl.mean_hsv_diff(a, b)
        assert direct < 10  # far less than the non-circular |dh| ~ 250


class TestNearestDelta:
    def test_matches_brute_force(self, impl):
        rng = np.random.default_rng(9)
        for _ in range(10):
            h, w = rng.integers(4, 20, 2)
            depth = rng.random((h, w))
            pts = rng.integers(0, [h, w], (6, 2)).astype(np.int64)
            outer = rng.integers(0, [h, w], (8, 2)).astype(np.int64)
            inner = rng.integers(0, [h, w], (5, 2)).astype(np.int64)
            got = impl.nearest_depth_delta(pts, outer, inner, depth)
            expect = oracles.brute_nearest_delta(pts.tolist(), outer.tolist(),
                                                 inner.tolist(), depth)
            assert np.allclose(got, expect, atol=0)

    def test_empty_candidates_raise(self, impl):
        depth = np.zeros((4, 4))
        pts = np.array([[1, 1]], dtype=np.int64)
        with pytest.raises(ValueError):
            impl.nearest_depth_delta(pts, np.empty((0, 2), np.int64), pts, depth)


@pytest.mark.skipif(len(IMPLS) < 2, reason="compiled kernels unavailable")
class TestImplementationAgreement:
    def test_all_kernels_agree(self):
        a_impl, b_impl = IMPLS
        rng = np.random.default_rng(77)
        for _ in range(40):
            h, w = rng.integers(3, 48, 2)
            bits = (rng.random((h, w)) < 0.4).astype(np.uint8)
            r = int(rng.integers(1, 4))
            assert np.array_equal(a_impl.dilate(bits, r), b_impl.dilate(bits, r))
            assert np.array_equal(a_impl.erode(bits, r), b_impl.erode(bits, r))
            assert np.array_equal(a_impl.boundary(bits), b_impl.boundary(bits))
            fa = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            fb = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            assert a_impl.mean_hsv_diff(fa, fb) == pytest.approx(
                b_impl.mean_hsv_diff(fa, fb), abs=1e-9)
