"""Teacher backends: a generic chat-completion HTTP client and deterministic test doubles."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np
import requests

from ..corpus import LabeledSample, Taxonomy
from ..errors import PoolExhausted, TransportError
from ..evaluation import parse_report

log = logging.getLogger(__name__)

_BATCH_SIZE_RE = re.compile(r"please generate (\d+) training samples")
_ZERO_SHOT_TEXT_RE = re.compile(r"Text-to-classifiy: \n(.*)\nAssistant:\Z", re.S)


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int
    output_tokens: int


class TeacherBackend(Protocol):
    def complete(self, prompt: str) -> Completion: ...


def count_tokens(text: str) -> int:
    """Whitespace-token proxy used when a backend reports no usage."""
    return len(text.split())


@dataclass
class HTTPConfig:
    endpoint: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 4096
    timeout: float = 120.0
    api_key_env: str | None = "OPENAI_API_KEY"


class HTTPChatBackend:
    """POSTs ``{"model", "messages", "temperature", "max_tokens"}`` to a chat-completion endpoint.

    One attempt per call; retrying is the caller's job. Any network error,
    non-2xx status or unexpected body is raised as :class:`TransportError`.
    """

    def __init__(self, config: HTTPConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        env = self.config.api_key_env
        if env and os.environ.get(env):
            headers["Authorization"] = f"Bearer {os.environ[env]}"
        return headers

    def complete(self, prompt: str) -> Completion:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        try:
            resp = self.session.post(
                self.config.endpoint,
                json=payload,
                headers=self._headers(),
                timeout=self.config.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if not resp.ok:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response body: {resp.text[:500]}") from exc
        if not isinstance(text, str):
            raise TransportError("response content is not text")
        usage = data.get("usage") or {}
        n_in = usage.get("prompt_tokens", usage.get("input_tokens"))
        n_out = usage.get("completion_tokens", usage.get("output_tokens"))
        return Completion(
            text=text,
            input_tokens=int(n_in) if n_in is not None else count_tokens(prompt),
            output_tokens=int(n_out) if n_out is not None else count_tokens(text),
        )


def allocate(n: int, weights: Sequence[float]) -> list[int]:
    """Split ``n`` into integer quotas proportional to ``weights`` (largest remainder).

    Zero total weight falls back to a uniform split. Remainder ties go to the
    lower index.
    """
    w = np.clip(np.asarray(weights, dtype=np.float64), 0.0, None)
    if w.sum() <= 0:
        w = np.ones_like(w)
    exact = n * w / w.sum()
    quotas = np.floor(exact).astype(int)
    rest = n - int(quotas.sum())
    order = sorted(range(len(w)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in order[:rest]:
        quotas[i] += 1
    return quotas.tolist()


class MockOracleBackend:
    """Stand-in teacher that answers PGKD prompts from a held-out labelled reserve.

    It reads the validation report in the prompt, if any, and spends the batch
    on classes in proportion to ``1 - F1``. Each drawn label is flipped to a
    random wrong class with probability ``quality`` (a noise rate).
    """

    def __init__(
        self,
        taxonomy: Taxonomy,
        reserve: Sequence[LabeledSample],
        quality: float = 0.0,
        seed: int = 0,
    ):
        if not 0.0 <= quality <= 1.0:
            raise ValueError("quality must be in [0, 1]")
        self.taxonomy = taxonomy
        self.quality = quality
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        by_class: list[list[str]] = [[] for _ in taxonomy.classes]
        for s in reserve:
            by_class[s.label].append(s.text)
        missing = [taxonomy.name(i) for i, texts in enumerate(by_class) if not texts]
        if missing:
            raise ValueError(f"reserve has no samples for classes {missing}")
        self._queues = [
            [texts[i] for i in self._rng.permutation(len(texts))] for texts in by_class
        ]
        self.calls = 0

    def remaining(self, label: int) -> int:
        return len(self._queues[label])

    def weights_from_prompt(self, prompt: str) -> list[float]:
        parsed = parse_report(prompt, self.taxonomy)
        if parsed is None:
            return [1.0] * len(self.taxonomy)
        return [1.0 - parsed["classes"][name][2] for name in self.taxonomy.classes]

    def complete(self, prompt: str) -> Completion:
        m = _BATCH_SIZE_RE.search(prompt)
        n = int(m.group(1)) if m else 32
        with self._lock:
            self.calls += 1
            quotas = allocate(n, self.weights_from_prompt(prompt))
            for label, q in enumerate(quotas):
                if q > len(self._queues[label]):
                    raise PoolExhausted(self.taxonomy.name(label))
            records = []
            n_classes = len(self.taxonomy)
            for label, q in enumerate(quotas):
                for _ in range(q):
                    text = self._queues[label].pop()
                    out = label
                    if n_classes > 1 and self._rng.random() < self.quality:
                        out = int(self._rng.integers(n_classes - 1))
                        out += out >= label
                    records.append({"text": text, "label": self.taxonomy.name(out)})
            records = [records[i] for i in self._rng.permutation(len(records))]
        text = json.dumps(records, ensure_ascii=False, indent=1)
        return Completion(text, count_tokens(prompt), count_tokens(text))


class OracleClassifierBackend:
    """Answers zero-shot prompts from known labels, wrong with probability ``quality``.

    The noise draw is keyed on the text, so answers do not depend on call order.
    """

    def __init__(
        self, taxonomy: Taxonomy, labels: Mapping[str, int], quality: float = 0.0, seed: int = 0
    ):
        self.taxonomy = taxonomy
        self.labels = dict(labels)
        self.quality = quality
        self.seed = seed

    def complete(self, prompt: str) -> Completion:
        m = _ZERO_SHOT_TEXT_RE.search(prompt)
        text = m.group(1) if m else ""
        label = self.labels.get(text)
        if label is None:
            answer = "I cannot classify this text."
        else:
            digest = hashlib.sha256(f"{self.seed}\x00{text}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            n = len(self.taxonomy)
            if n > 1 and rng.random() < self.quality:
                wrong = int(rng.integers(n - 1))
                label = wrong + (wrong >= label)
            answer = json.dumps({"class_label": label, "class_names": self.taxonomy.name(label)})
        return Completion(answer, count_tokens(prompt), count_tokens(answer))


class ConstantBackend:
    """Returns the same response for every prompt."""

    def __init__(self, response: str):
        self.response = response
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> Completion:
        with self._lock:
            self.calls += 1
        return Completion(self.response, count_tokens(prompt), count_tokens(self.response))


@dataclass
class RecordingBackend:
    """Wraps a backend and keeps every prompt it was sent."""

    inner: TeacherBackend
    prompts: list[str] = field(default_factory=list)

    def complete(self, prompt: str) -> Completion:
        self.prompts.append(prompt)
        return self.inner.complete(prompt)
