"""Extraction and validation of generated samples from raw teacher responses."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Any, Collection

from ..corpus import LabeledSample, Taxonomy
from ..errors import UnparsableResponse

_decoder = json.JSONDecoder()


class RejectReason(str, enum.Enum):
    MALFORMED_RECORD = "MalformedRecord"
    MISSING_FIELD = "MissingField"
    EMPTY_TEXT = "EmptyText"
    UNKNOWN_LABEL = "UnknownLabel"
    DUPLICATE = "Duplicate"
    OVERFLOW = "Overflow"
    TRUNCATED = "Truncated"


@dataclass(frozen=True)
class Rejection:
    record: Any
    reason: RejectReason


@dataclass
class GenerationBatch:
    accepted: list[LabeledSample] = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)
    raw_response: str = ""
    failures: list[str] = field(default_factory=list)
    attempts: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    prompt: str = ""

    @property
    def generated(self) -> int:
        return len(self.accepted) + len(self.rejected)


def strip_trailing_commas(text: str) -> str:
    """Drop commas that directly precede a closing bracket, outside string literals."""
    out = []
    in_string = escaped = False
    n = len(text)
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == ",":
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            if j < n and text[j] in "]}":
                continue
        out.append(ch)
    return "".join(out)


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _scan_list(text: str, start: int) -> tuple[list, str | None]:
    """Decode elements of the JSON array opening at ``start`` one at a time.

    Returns the decoded elements and, when the array is cut short, the
    undecodable tail.
    """
    items: list = []
    pos = _skip_ws(text, start + 1)
    if pos < len(text) and text[pos] == "]":
        return items, None
    while True:
        try:
            obj, pos = _decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            return items, text[pos:]
        items.append(obj)
        pos = _skip_ws(text, pos)
        if pos < len(text) and text[pos] == ",":
            pos = _skip_ws(text, pos + 1)
        elif pos < len(text) and text[pos] == "]":
            return items, None
        else:
            return items, text[pos:]


def extract_payload(raw: str) -> tuple[list, str | None]:
    """Find the first list-of-objects payload in ``raw``.

    Surrounding prose, code fences, trailing commas and truncated arrays are
    tolerated; a lone object carrying ``text`` or ``label`` counts as a
    one-element list.
    """
    text = strip_trailing_commas(raw)
    for m in re.finditer(r"\[", text):
        items, tail = _scan_list(text, m.start())
        if any(isinstance(it, dict) for it in items):
            if tail is not None and not tail.strip():
                tail = None
            return items, tail
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = _decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and ("text" in obj or "label" in obj):
            return [obj], None
    raise UnparsableResponse("no list of objects found in teacher response")


def validate_record(record: Any, taxonomy: Taxonomy) -> tuple[RejectReason | None, str, int]:
    if not isinstance(record, dict):
        return RejectReason.MALFORMED_RECORD, "", -1
    if "text" not in record or "label" not in record:
        return RejectReason.MISSING_FIELD, "", -1
    text, label = record["text"], record["label"]
    if not isinstance(text, str):
        return RejectReason.MALFORMED_RECORD, "", -1
    if not text.strip():
        return RejectReason.EMPTY_TEXT, "", -1
    label_id = taxonomy.index(label) if isinstance(label, str) else None
    if label_id is None:
        return RejectReason.UNKNOWN_LABEL, text, -1
    return None, text, label_id


def parse_generation(
    raw: str,
    taxonomy: Taxonomy,
    step: int,
    history_texts: Collection[str],
    next_id: int = 0,
    limit: int | None = None,
) -> GenerationBatch:
    """Turn a raw teacher response into accepted samples and typed rejections.

    Accepted samples get consecutive ids from ``next_id`` and carry ``step``.
    Texts already in ``history_texts`` or earlier in the same response are
    duplicates; valid records past ``limit`` are rejected as overflow.
    """
    items, tail = extract_payload(raw)
    batch = GenerationBatch(raw_response=raw)
    seen: set[str] = set()
    for record in items:
        reason, text, label = validate_record(record, taxonomy)
        if reason is None and (text in history_texts or text in seen):
            reason = RejectReason.DUPLICATE
        if reason is None and limit is not None and len(batch.accepted) >= limit:
            reason = RejectReason.OVERFLOW
        if reason is not None:
            batch.rejected.append(Rejection(record, reason))
            continue
        seen.add(text)
        batch.accepted.append(
            LabeledSample(id=next_id + len(batch.accepted), text=text, label=label, step=step)
        )
    if tail is not None:
        batch.rejected.append(Rejection(tail, RejectReason.TRUNCATED))
    return batch
