"""The adapter service: probes capabilities at startup and mounts routes for
whatever loaded. Schema-identical to the synthetic backend service by
construction (both are built from the same wire codecs)."""

from __future__ import annotations

import logging

from fastapi import FastAPI

from motionforge.backends.server import build_app

from .capabilities import probe_adapters
from .config import AdapterConfig

log = logging.getLogger(__name__)


def build_adapter_app(cfg: AdapterConfig | None = None) -> FastAPI:
    cfg = cfg or AdapterConfig()
    impls, unavailable = probe_adapters(cfg)
    app = build_app(impls)

    @app.get("/health/unavailable")
    def health_unavailable():
        return {"unavailable": unavailable}

    log.info("serving capabilities: %s", sorted(impls))
    for cap, reason in sorted(unavailable.items()):
        log.info("not serving %s: %s", cap, reason)
    return app
