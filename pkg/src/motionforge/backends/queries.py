"""Search-query generation and the final per-track image check.

Both lean on the text backend: breed and context lists are requested in
python-list format, combined as a cartesian product, and shuffled with a
seeded RNG so runs are reproducible.
"""

from __future__ import annotations

import ast
import logging
import random

from .gateway import Gateway
from .protocol import BackendParseError, RequestMeta

log = logging.getLogger(__name__)

BREED_PROMPT = (
    "List {n} types of {category}. Only show the list in python list format "
    "without using a code block."
)
CONTEXT_PROMPT = (
    "List {n} search phrases or autocompletions for searching {category} videos "
    "on a video sharing website. Assume user already input the word {category}, "
    "only show the trailing phrases. Only show the list in python list format "
    "without using a code block."
)
IMAGE_CHECK_PROMPT = (
    "Does this image show a realistic photo of a {category} without any occlusion? "
    "Answer yes or no only."
)


def _parse_list(raw: str, expect: int) -> list[str]:
    try:
        value = ast.literal_eval(raw.strip())
    except (ValueError, SyntaxError) as exc:
        raise BackendParseError(f"expected a python list, got: {exc}", raw=raw) from exc
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise BackendParseError("expected a list of strings", raw=raw)
    if len(value) != expect:
        log.warning("text backend returned %d entries, expected %d", len(value), expect)
    return [v.strip() for v in value if v.strip()]


def generate_queries(category: str, gateway: Gateway, n_breeds: int = 10,
                     n_contexts: int = 10, seed: int = 0) -> list[str]:
    """Breeds x contexts cartesian product of search strings, shuffled."""
    meta = RequestMeta(category=category)
    breeds = _parse_list(
        gateway.text_generate(BREED_PROMPT.format(n=n_breeds, category=category), meta),
        n_breeds)
    contexts = _parse_list(
        gateway.text_generate(CONTEXT_PROMPT.format(n=n_contexts, category=category), meta),
        n_contexts)
    queries = [f"{b} {c}" for b in breeds for c in contexts]
    random.Random(seed).shuffle(queries)
    return queries


def final_image_check(image, category: str, gateway: Gateway,
                      meta: RequestMeta | None = None) -> bool:
    """True iff the text backend answers the realism/occlusion prompt with yes."""
    meta = meta or RequestMeta(category=category)
    answer = gateway.text_generate(
        IMAGE_CHECK_PROMPT.format(category=category), meta, image=image)
    token = answer.strip().lower().rstrip(".!")
    if token == "yes":
        return True
    if token != "no":
        log.warning("image check returned %r; treating as reject", answer)
    return False
