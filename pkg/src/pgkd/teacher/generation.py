"""Generation with retries, subset selection for prompts, and zero-shot classification."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Collection, Sequence, TypeVar

import numpy as np

from ..corpus import Taxonomy
from ..errors import TeacherError
from .backends import TeacherBackend
from .parsing import GenerationBatch, parse_generation
from .prompts import PromptContext, build_pgkd_prompt, build_zero_shot_prompt

log = logging.getLogger(__name__)

T = TypeVar("T")

_decoder = json.JSONDecoder()
_FIELD_RE = re.compile(r'"(class_names|class_label)"\s*:\s*("(?:[^"\\]|\\.)*"|-?\d+)')


def stratified_subset(
    items: Sequence[T], labels: Sequence[int], k: int, rng: np.random.Generator
) -> list[T]:
    """Pick up to ``k`` items spreading picks across labels round-robin.

    Within each label the order is a seeded shuffle, and the label order of
    each round is shuffled once up front.
    """
    if k <= 0 or not items:
        return []
    buckets: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        buckets.setdefault(lab, []).append(i)
    queues = [list(rng.permutation(buckets[lab])) for lab in sorted(buckets)]
    queues = [queues[i] for i in rng.permutation(len(queues))]
    picked: list[int] = []
    while len(picked) < k and any(queues):
        for q in queues:
            if q and len(picked) < k:
                picked.append(int(q.pop(0)))
    return [items[i] for i in picked]


def generate(
    backend: TeacherBackend,
    ctx: PromptContext,
    retries: int = 2,
    *,
    step: int = 1,
    history_texts: Collection[str] = frozenset(),
    next_id: int = 0,
) -> GenerationBatch:
    """Prompt the teacher and parse its answer, retrying on teacher-side failures.

    Never raises for teacher failures: after ``retries + 1`` failed attempts
    the batch comes back with nothing accepted and the errors listed in
    ``failures``. Token counts cover every attempt.
    """
    if retries < 0:
        raise ValueError("retries must be >= 0")
    prompt = build_pgkd_prompt(ctx)
    failures: list[str] = []
    n_in = n_out = 0
    for attempt in range(1, retries + 2):
        try:
            completion = backend.complete(prompt)
            n_in += completion.input_tokens
            n_out += completion.output_tokens
            batch = parse_generation(
                completion.text,
                ctx.taxonomy,
                step,
                history_texts,
                next_id=next_id,
                limit=ctx.gen_batch_size,
            )
        except TeacherError as exc:
            log.warning("teacher attempt %d failed: %s", attempt, exc)
            failures.append(f"{type(exc).__name__}: {exc}")
            continue
        batch.failures = failures
        batch.attempts = attempt
        batch.input_tokens, batch.output_tokens = n_in, n_out
        batch.prompt = prompt
        return batch
    return GenerationBatch(
        failures=failures,
        attempts=retries + 1,
        input_tokens=n_in,
        output_tokens=n_out,
        prompt=prompt,
    )


def parse_zero_shot_response(raw: str, taxonomy: Taxonomy) -> int | None:
    """Class id named in a zero-shot answer, or None if it names no known class."""
    fields: dict = {}
    for m in re.finditer(r"\{", raw):
        try:
            obj, _ = _decoder.raw_decode(raw, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and ("class_names" in obj or "class_label" in obj):
            fields = obj
            break
    if not fields:
        for key, value in _FIELD_RE.findall(raw):
            fields.setdefault(key, json.loads(value))
    name = fields.get("class_names")
    if isinstance(name, str) and name.strip():
        return taxonomy.index(name)
    label = fields.get("class_label")
    if isinstance(label, str):
        return taxonomy.index(label)
    if isinstance(label, int) and not isinstance(label, bool) and 0 <= label < len(taxonomy):
        return label
    return None


def zero_shot_classify(
    backend: TeacherBackend, taxonomy: Taxonomy, texts: Sequence[str], workers: int = 1
) -> tuple[list[int | None], int]:
    """Classify each text with one zero-shot prompt.

    Returns predictions aligned with ``texts`` (None where the answer could not
    be matched to a class or the call failed) and the number of such failures.
    """

    def one(text: str) -> int | None:
        try:
            return parse_zero_shot_response(
                backend.complete(build_zero_shot_prompt(taxonomy, text)).text, taxonomy
            )
        except TeacherError as exc:
            log.warning("zero-shot call failed: %s", exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            preds = list(pool.map(one, texts))
    else:
        preds = [one(t) for t in texts]
    return preds, sum(p is None for p in preds)
