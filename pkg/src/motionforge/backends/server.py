"""FastAPI app exposing a set of capability implementations over the wire
protocol. Used to serve synthetic backends in tests and by adapter services
that bring their own implementations."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .protocol import CAPABILITIES, BackendContractError, BackendError
from . import wire

log = logging.getLogger(__name__)


def build_app(impls: dict[str, object]) -> FastAPI:
    app = FastAPI(title="motionforge backend service")

    @app.get("/health")
    def health():
        return {"capabilities": sorted(impls)}

    def make_route(kind: str):
        async def route(request: Request):
            body = await request.json()
            try:
                kw = wire.decode_request(kind, body)
                impl = impls[kind]
                if kind == "text_generate":
                    result = impl.text_generate(kw["prompt"], kw["image"], kw["meta"])
                elif kind == "embed_text":
                    result = impl.embed_text(kw["text"], kw["meta"])
                elif kind == "embed_image":
                    result = impl.embed_image(kw["image"], kw["grid"], kw["patch"], kw["meta"])
                elif kind == "detect":
                    result = impl.detect(kw["image"], kw["prompt"], kw["meta"])
                elif kind == "segment_track":
                    result = impl.segment_track(kw["frames"], kw["prompts"], kw["meta"])
                elif kind == "keypoints":
                    result = impl.keypoints(kw["image"], kw["box"], kw["meta"])
                elif kind == "depth":
                    result = impl.depth(kw["image"], kw["meta"])
                elif kind == "flow":
                    result = impl.flow(kw["image"], kw["image_next"], kw["meta"])
                elif kind == "fetch_video":
                    result = impl.fetch_video(kw["video_id"], kw["meta"])
                else:  # pragma: no cover
                    raise ValueError(kind)
                return JSONResponse(wire.encode_response(kind, result))
            except BackendContractError as exc:
                return JSONResponse({"error": str(exc)}, status_code=422)
            except BackendError as exc:
                return JSONResponse({"error": str(exc)}, status_code=503)
            except Exception as exc:  # pragma: no cover - defensive
                log.exception("capability %s failed", kind)
                return JSONResponse({"error": str(exc)}, status_code=500)

        return route

    for kind in CAPABILITIES:
        if kind in impls:
            app.post(f"/v1/{kind}")(make_route(kind))

    return app
