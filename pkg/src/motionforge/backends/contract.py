"""Shared schema-contract corpus for backend services.

A fixed set of wire-format requests plus validators for the responses. Any
service implementing docs/wire_protocol.md must answer every request for the
capabilities it serves with a schema-valid body; the synthetic backends and
real model adapters run the identical corpus, so the pipeline cannot tell
implementations apart by schema.

The corpus images come from one small deterministic scene, so the synthetic
side (which answers from ground truth) is well-defined; real adapters simply
process the pixels and ignore the meta block.
"""

from __future__ import annotations

import base64


from ..synth import ActorSpec, OccluderSpec, Rendered, SceneSpec, render
from . import encoding

CONTRACT_SCENE_ID = "contract_scene"


def contract_scene() -> Rendered:
    spec = SceneSpec(
        scene_id=CONTRACT_SCENE_ID, duration=8, width=96, height=64,
        category="horse",
        actors=[ActorSpec(actor_id="a0", shape="ellipse", color=[200, 80, 50],
                          depth=0.5, path=[[0, 40, 32], [7, 54, 32]],
                          size=[[0, 14, 10]])],
        occluders=[OccluderSpec(x_min=0, y_min=0, x_max=20, y_max=64,
                                depth=0.9, color=[25, 25, 25])])
    return render(spec)


def contract_requests() -> list[tuple[str, dict]]:
    """(capability, wire request body) pairs covering every route."""
    scene = contract_scene()
    f0, f1 = scene.frames[0], scene.frames[1]
    img0, img1 = encoding.encode_image(f0), encoding.encode_image(f1)
    box = scene.gt.actors["a0"][0].bbox.to_list()
    meta = {"video_id": CONTRACT_SCENE_ID, "category": "horse", "frame_index": 0}
    crop_meta = {**meta, "crop": [26, 16, 32, 32]}
    return [
        ("text_generate", {"meta": meta,
                           "prompt": "List 3 types of horse. Only show the list in "
                                     "python list format without using a code block."}),
        ("embed_text", {"meta": meta, "text": "A photo of horse"}),
        ("embed_image", {"meta": meta, "image": img0, "grid": False, "patch": 14}),
        ("embed_image", {"meta": meta, "image": img0, "grid": True, "patch": 16}),
        ("detect", {"meta": meta, "image": img0, "prompt": "horse"}),
        ("segment_track", {"meta": {**meta, "frame_indices": [0, 1]},
                           "frames": [img0, img1],
                           "prompts": [{"frame": 0, "instance": "t0", "box": box}]}),
        ("keypoints", {"meta": crop_meta, "image": img0, "box": box}),
        ("depth", {"meta": meta, "image": img0}),
        ("flow", {"meta": {**meta, "frame_indices": [0, 1]},
                  "image": img0, "image_next": img1}),
        ("fetch_video", {"meta": {}, "video_id": CONTRACT_SCENE_ID}),
    ]


def _grid_issues(grid, expect_hw=None, expect_c=None) -> list[str]:
    issues = []
    if not isinstance(grid, dict):
        return ["grid payload is not an object"]
    for key in ("width", "height", "channels", "dtype", "data_b64"):
        if key not in grid:
            issues.append(f"grid missing {key!r}")
    if issues:
        return issues
    if grid["dtype"] != "<f4":
        issues.append(f"grid dtype {grid['dtype']!r} != '<f4'")
    try:
        raw = base64.b64decode(grid["data_b64"])
    except Exception:
        return issues + ["grid data_b64 undecodable"]
    expect = grid["width"] * grid["height"] * grid["channels"] * 4
    if len(raw) != expect:
        issues.append(f"grid payload {len(raw)} bytes != {expect}")
    if expect_hw and (grid["height"], grid["width"]) != expect_hw:
        issues.append(f"grid dims {(grid['height'], grid['width'])} != {expect_hw}")
    if expect_c is not None and grid["channels"] != expect_c:
        issues.append(f"grid channels {grid['channels']} != {expect_c}")
    return issues


def check_response(capability: str, request: dict, response: dict) -> list[str]:
    """Schema issues for one response; empty list = conforming."""
    issues: list[str] = []
    if capability == "text_generate":
        if not isinstance(response.get("text"), str):
            issues.append("text_generate must return {'text': str}")
    elif capability == "embed_text" or (capability == "embed_image"
                                        and not request.get("grid")):
        vec = response.get("vector")
        if not isinstance(vec, list) or not vec or \
                not all(isinstance(v, (int, float)) for v in vec):
            issues.append("expected {'vector': [float, ...]}")
    elif capability == "embed_image":
        img = encoding.decode_image(request["image"])
        patch = request["patch"]
        issues += _grid_issues(response.get("grid"),
                               expect_hw=(img.shape[0] // patch, img.shape[1] // patch))
    elif capability == "detect":
        boxes = response.get("boxes")
        scores = response.get("scores")
        if not isinstance(boxes, list) or not isinstance(scores, list):
            issues.append("detect must return boxes and scores arrays")
        elif len(boxes) != len(scores):
            issues.append(f"{len(boxes)} boxes vs {len(scores)} scores")
        else:
            for b in boxes:
                if len(b) != 4 or b[0] > b[2] or b[1] > b[3]:
                    issues.append(f"malformed box {b}")
            for s in scores:
                if not 0 <= s <= 1:
                    issues.append(f"score {s} outside [0,1]")
    elif capability == "segment_track":
        masks = response.get("masks")
        if not isinstance(masks, dict):
            return ["segment_track must return {'masks': {...}}"]
        n = len(request["frames"])
        h0 = encoding.decode_image(request["frames"][0]).shape[:2]
        wanted = {str(i) for i in range(n)}
        for inst, per in masks.items():
            if set(per) != wanted:
                issues.append(f"instance {inst}: frames {sorted(per)} != 0..{n - 1}")
                continue
            for fidx, payload in per.items():
                m = encoding.decode_mask(payload)
                if (m.height, m.width) != h0:
                    issues.append(f"instance {inst} frame {fidx}: mask "
                                  f"{(m.height, m.width)} != {h0}")
    elif capability == "keypoints":
        kps = response.get("keypoints")
        if not isinstance(kps, list) or not kps:
            issues.append("keypoints must return a nonempty array")
        else:
            for row in kps:
                if len(row) != 3:
                    issues.append(f"keypoint row {row} is not [x, y, confidence]")
                elif not 0 <= row[2] <= 1:
                    issues.append(f"confidence {row[2]} outside [0,1]")
    elif capability == "depth":
        img = encoding.decode_image(request["image"])
        issues += _grid_issues(response.get("grid"), expect_hw=img.shape[:2], expect_c=1)
    elif capability == "flow":
        img = encoding.decode_image(request["image"])
        issues += _grid_issues(response.get("grid"), expect_hw=img.shape[:2], expect_c=2)
    elif capability == "fetch_video":
        if response.get("container") not in ("frame_dir_zip", "file"):
            issues.append(f"container {response.get('container')!r} unknown")
        try:
            if not base64.b64decode(response.get("data_b64", "")):
                issues.append("empty video payload")
        except Exception:
            issues.append("data_b64 undecodable")
    else:
        issues.append(f"unknown capability {capability!r}")
    return issues


def run_contract_corpus(post, capabilities: set[str] | None = None) -> dict[str, list[str]]:
    """Run every corpus request through `post(capability, body) -> response`.

    Returns {check-name: issues}; all-empty means the service conforms.
    """
    results: dict[str, list[str]] = {}
    for i, (cap, body) in enumerate(contract_requests()):
        if capabilities is not None and cap not in capabilities:
            continue
        name = f"{cap}#{i}"
        try:
            response = post(cap, body)
        except Exception as exc:
            results[name] = [f"request failed: {exc}"]
            continue
        results[name] = check_response(cap, body, response)
    return results
