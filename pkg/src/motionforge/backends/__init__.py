from .protocol import (
    CAPABILITIES,
    BackendContractError,
    BackendError,
    BackendParseError,
    Detection,
    RequestMeta,
    RetriableBackendError,
    SegmentPrompt,
    VideoPayload,
)
from .gateway import Gateway
from .synthetic import SyntheticBackends

__all__ = [
    "CAPABILITIES",
    "BackendContractError",
    "BackendError",
    "BackendParseError",
    "Detection",
    "Gateway",
    "RequestMeta",
    "RetriableBackendError",
    "SegmentPrompt",
    "SyntheticBackends",
    "VideoPayload",
]
