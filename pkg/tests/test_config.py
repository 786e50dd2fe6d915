import pytest

from motionforge.config import Config, ConfigError, load_config


class TestDefaults:
    def test_documented_defaults(self):
        cfg = Config()
        assert cfg.shot.threshold == 25.0
        assert cfg.shot.min_len == 30
        assert cfg.shot.target_fps == 10.0
        assert cfg.semantic.n_samples == 10
        assert cfg.semantic.weight == 2.5
        assert cfg.track.interval == 50
        assert cfg.track.overlap_iou == 0.1
        assert cfg.track.inconsistent_iou == 0.3
        assert cfg.track.truncation_margin == 0.02
        assert cfg.track.min_len == 30
        assert cfg.track.max_len == 500
        assert cfg.track.max_gap == 5
        assert cfg.crop.area_ratio == 2.0
        assert cfg.crop.smooth_window == 10
        assert cfg.crop.size == 512
        assert cfg.feature.morph_radius == 3
        assert cfg.feature.occlusion_tau == 0.05
        assert cfg.eval.kt_stride == 10
        assert cfg.eval.pck_alphas == [0.1, 0.05]
        assert cfg.store.lease_seconds == 600.0
        assert cfg.backends.retries == 3
        assert cfg.queries.n_breeds == 10
        assert cfg.queries.n_contexts == 10


class TestFileLoading:
    def test_toml_tree(self, tmp_path):
        p = tmp_path / "mf.toml"
        p.write_text("""
categories = ["horse", "dog"]
[shot]
threshold = 30.0
[track]
max_gap = 3
[backends]
mode = "http"
[backends.endpoints]
default = "http://adapters:9000"
""")
        cfg = load_config(p)
        assert cfg.shot.threshold == 30.0
        assert cfg.track.max_gap == 3
        assert cfg.backends.endpoints["default"] == "http://adapters:9000"
        assert cfg.categories == ["horse", "dog"]
        assert cfg.crop.size == 512  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "mf.toml"
        p.write_text("[shot]\nthresold = 3\n")
        with pytest.raises(ConfigError):
            load_config(p)


class TestEnvOverrides:
    def test_env_overrides_file(self, tmp_path):
        p = tmp_path / "mf.toml"
        p.write_text("[shot]\nthreshold = 30.0\n")
        cfg = load_config(p, environ={"MF_SHOT__THRESHOLD": "12.5",
                                      "MF_CROP__SIZE": "64",
                                      "MF_BACKENDS__MODE": "synthetic"})
        assert cfg.shot.threshold == 12.5
        assert cfg.crop.size == 64

    def test_env_bad_key_rejected(self):
        with pytest.raises(ConfigError):
            load_config(None, environ={"MF_SHOT__NOPE": "1"})

    def test_non_prefixed_env_ignored(self):
        cfg = load_config(None, environ={"PATH": "/bin", "MF_TRACK__MAX_GAP": "7"})
        assert cfg.track.max_gap == 7
