"""One TOML config tree covering every pipeline threshold, with environment
overrides (MF_SECTION__KEY=value) applied on top of the file."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

ENV_PREFIX = "MF_"


@dataclass
class ShotConfig:
    threshold: float = 25.0
    min_len: int = 30
    target_fps: float = 10.0
    still_eps: float = 0.5


@dataclass
class SemanticConfig:
    threshold: float = 0.55
    n_samples: int = 10
    weight: float = 2.5
    seed: int = 0


@dataclass
class TrackConfig:
    interval: int = 50
    overlap_iou: float = 0.1
    inconsistent_iou: float = 0.3
    truncation_margin: float = 0.02
    min_len: int = 30
    max_len: int = 500
    max_gap: int = 5
    assoc_iou: float = 0.3
    prompt_template: str = "{category}"
    final_check: bool = True
    check_seed: int = 0


@dataclass
class CropConfig:
    area_ratio: float = 2.0
    smooth_window: int = 10
    size: int = 512


@dataclass
class FeatureConfig:
    morph_radius: int = 3
    occlusion_tau: float = 0.05
    grid_patch: int = 14
    feature_grids: bool = True


@dataclass
class EvalConfig:
    kt_stride: int = 10
    pck_alphas: list[float] = field(default_factory=lambda: [0.1, 0.05])
    per_sequence_mean: bool = False


@dataclass
class StoreConfig:
    data_root: str = "mf_data"
    lease_seconds: float = 600.0

    @property
    def db_path(self) -> str:
        return str(Path(self.data_root) / "store.db")


@dataclass
class BackendsConfig:
    mode: str = "synthetic"  # "synthetic" | "http"
    scene_dir: str = "fixtures/scenes"
    endpoints: dict = field(default_factory=dict)  # capability -> base URL
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.2
    max_inflight: int = 8


@dataclass
class QueryConfig:
    n_breeds: int = 10
    n_contexts: int = 10
    seed: int = 0


@dataclass
class ReviewConfig:
    port: int = 8008
    per_category_cap: int = 10


@dataclass
class Config:
    shot: ShotConfig = field(default_factory=ShotConfig)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    crop: CropConfig = field(default_factory=CropConfig)
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    backends: BackendsConfig = field(default_factory=BackendsConfig)
    queries: QueryConfig = field(default_factory=QueryConfig)
    review: ReviewConfig = field(default_factory=ReviewConfig)
    categories: list[str] = field(default_factory=lambda: ["horse"])


class ConfigError(Exception):
    pass


def _coerce(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a table for {cls.__name__}, got {type(data).__name__}")
    kwargs = {}
    known = {f.name: f for f in fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r} in {cls.__name__}")
        sub = _DATACLASS_FIELDS.get((cls, key))
        kwargs[key] = _coerce(sub, value) if sub else value
    return cls(**kwargs)


_DATACLASS_FIELDS = {
    (Config, f.name): f.default_factory
    for f in fields(Config)
    if f.default_factory is not None and is_dataclass(f.default_factory)
}


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(cfg: Config, environ=None) -> Config:
    env = os.environ if environ is None else environ
    for key, raw in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        target = cfg
        for part in path[:-1]:
            if not hasattr(target, part):
                raise ConfigError(f"env override {key}: no section {part!r}")
            target = getattr(target, part)
        leaf = path[-1]
        if not hasattr(target, leaf):
            raise ConfigError(f"env override {key}: no key {leaf!r}")
        setattr(target, leaf, _parse_env_value(raw))
    return cfg


def load_config(path=None, environ=None) -> Config:
    """Config file (TOML) + env overrides; both optional."""
    data = {}
    if path is not None:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    cfg = _coerce(Config, data)
    return apply_env_overrides(cfg, environ)
