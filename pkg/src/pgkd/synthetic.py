"""Synthetic text-classification corpora with class-conditional vocabularies.

Each class owns a small set of pseudo-words. A text mixes words of its own
class, words of a neighbouring class (to create confusable pairs) and words
from a shared background vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabeledSample, Taxonomy

_ONSETS = "b c d f g h j k l m n p r s t v w z br cr dr fl gr kl pl pr st tr".split()
_VOWELS = "a e i o u ai ea io ou".split()


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 20
    words_per_class: int = 30
    shared_words: int = 400
    min_length: int = 8
    max_length: int = 16
    signal: float = 0.25  # share of tokens from the sample's own class vocabulary
    confusion: float = 0.12  # share from the neighbouring class vocabulary


def _pseudo_words(n: int, rng: np.random.Generator) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        k = int(rng.integers(2, 4))
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(k)
        )
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


class SyntheticCorpus:
    """Deterministic generator; ``sample`` can be called repeatedly for fresh texts."""

    def __init__(
        self,
        spec: SyntheticSpec = SyntheticSpec(),
        seed: int = 0,
        class_names: Sequence[str] | None = None,
    ):
        self.spec = spec
        rng = np.random.default_rng(seed)
        names = class_names or [f"topic_{i:02d}" for i in range(spec.n_classes)]
        if len(names) != spec.n_classes:
            raise ValueError("class_names must match n_classes")
        self.taxonomy = Taxonomy(tuple(names))
        vocab = _pseudo_words(spec.n_classes * spec.words_per_class + spec.shared_words, rng)
        k = spec.words_per_class
        self.class_vocab = [vocab[i * k : (i + 1) * k] for i in range(spec.n_classes)]
        self.shared_vocab = vocab[spec.n_classes * k :]
        self._rng = rng
        self._seen: set[str] = set()
        self._next_id = 0

    def _text(self, label: int) -> str:
        s, rng = self.spec, self._rng
        n = int(rng.integers(s.min_length, s.max_length + 1))
        neighbour = (label + 1) % s.n_classes
        tokens = []
        for r in rng.random(n):
            if r < s.signal:
                pool = self.class_vocab[label]
            elif r < s.signal + s.confusion:
                pool = self.class_vocab[neighbour]
            else:
                pool = self.shared_vocab
            tokens.append(pool[rng.integers(len(pool))])
        return " ".join(tokens)

    def sample(self, n: int) -> list[LabeledSample]:
        """``n`` new samples with uniformly drawn labels and texts unique across calls."""
        out = []
        while len(out) < n:
            label = int(self._rng.integers(self.spec.n_classes))
            text = self._text(label)
            if text in self._seen:
                continue
            self._seen.add(text)
            out.append(LabeledSample(id=self._next_id, text=text, label=label))
            self._next_id += 1
        return out
