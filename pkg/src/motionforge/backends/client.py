"""HTTP capability client: same duck-typed surface as the in-process backends."""

from __future__ import annotations

import httpx

from .protocol import BackendContractError, RetriableBackendError
from . import wire


class HttpBackend:
    """Talks to one adapter service exposing /v1/<capability> routes."""

    def __init__(self, base_url: str, timeout: float = 60.0, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, kind: str, body: dict) -> dict:
        try:
            resp = self._client.post(f"{self.base_url}/v1/{kind}", json=body)
        except httpx.HTTPError as exc:
            raise RetriableBackendError(f"{kind}: transport failure: {exc}") from exc
        if resp.status_code >= 500:
            raise RetriableBackendError(f"{kind}: server error {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendContractError(f"{kind}: rejected ({resp.status_code}): {resp.text[:200]}")
        return resp.json()

    def _roundtrip(self, kind: str, **kw):
        return wire.decode_response(kind, self._post(kind, wire.encode_request(kind, **kw)))

    def text_generate(self, prompt, image, meta):
        return self._roundtrip("text_generate", prompt=prompt, image=image, meta=meta)

    def embed_text(self, text, meta):
        return self._roundtrip("embed_text", text=text, meta=meta)

    def embed_image(self, image, grid, patch, meta):
        return self._roundtrip("embed_image", image=image, grid=grid, patch=patch, meta=meta)

    def detect(self, image, prompt, meta):
        return self._roundtrip("detect", image=image, prompt=prompt, meta=meta)

    def segment_track(self, frames, prompts, meta):
        return self._roundtrip("segment_track", frames=frames, prompts=prompts, meta=meta)

    def keypoints(self, image, box, meta):
        return self._roundtrip("keypoints", image=image, box=box, meta=meta)

    def depth(self, image, meta):
        return self._roundtrip("depth", image=image, meta=meta)

    def flow(self, image, image_next, meta):
        return self._roundtrip("flow", image=image, image_next=image_next, meta=meta)

    def fetch_video(self, video_id, meta):
        return self._roundtrip("fetch_video", video_id=video_id, meta=meta)
