"""Adapter service configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

DEFAULT_MODELS = {
    "depth": "depth-anything/Depth-Anything-V2-Small-hf",
    "detect": "IDEA-Research/grounding-dino-tiny",
    "keypoints": "usyd-community/vitpose-base-simple",
    "embed": "openai/clip-vit-base-patch32",
}


@dataclass
class TextEndpoint:
    base_url: str = ""  # OpenAI-compatible chat completions service
    api_key: str = ""
    model: str = "gpt-4o-mini"
    timeout: float = 60.0


@dataclass
class AdapterConfig:
    device: str = "cpu"
    batch_size: int = 4
    video_dir: str = "videos"
    detect_threshold: float = 0.3
    models: dict = field(default_factory=lambda: dict(DEFAULT_MODELS))
    text: TextEndpoint = field(default_factory=TextEndpoint)


def load_adapter_config(path=None) -> AdapterConfig:
    if path is None:
        return AdapterConfig()
    with open(path, "rb") as f:
        data = tomllib.load(f)
    text = TextEndpoint(**data.pop("text", {}))
    models = dict(DEFAULT_MODELS)
    models.update(data.pop("models", {}))
    return AdapterConfig(text=text, models=models, **data)
