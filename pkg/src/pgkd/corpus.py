"""Datasets, taxonomies, seeded sampling and train/validation splitting.

Datasets are line-delimited JSON, one ``{"text": ..., "label": ...}`` object
per line with the label given as a class name. Taxonomies are plain text, one
class name per line; the line order fixes the class ids.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyText,
    InsufficientPool,
    InvalidTaxonomy,
    MalformedRecord,
    UnknownLabel,
)

DEFAULT_SEED_SET_SIZE = 1000
DEFAULT_TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class Taxonomy:
    classes: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(c.strip() for c in self.classes)
        if not names:
            raise InvalidTaxonomy("taxonomy is empty")
        if any(not n for n in names):
            raise InvalidTaxonomy("taxonomy contains a blank class name")
        if len(set(names)) != len(names):
            raise InvalidTaxonomy("taxonomy contains duplicate class names")
        object.__setattr__(self, "classes", names)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def index(self, name: str) -> int | None:
        """Class id for ``name`` (trimmed, exact match) or None."""
        return self._index.get(name.strip())

    def name(self, label: int) -> str:
        return self.classes[label]

    @classmethod
    def load(cls, path: str | Path) -> "Taxonomy":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(line for line in lines if line.strip()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(c + "\n" for c in self.classes), encoding="utf-8")


@dataclass(frozen=True)
class LabeledSample:
    """A text/label pair. ``step`` is 0 for seed data, else the KD step that produced it."""

    id: int
    text: str
    label: int
    step: int = 0

    @property
    def is_seed(self) -> bool:
        return self.step == 0

    @property
    def origin(self) -> str:
        return "seed" if self.step == 0 else f"generated:{self.step}"


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[LabeledSample, ...]
    val: tuple[LabeledSample, ...]

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "val", tuple(self.val))
        if not self.train or not self.val:
            raise DegenerateSplit(
                f"split has {len(self.train)} train and {len(self.val)} val samples"
            )
        if {s.id for s in self.train} & {s.id for s in self.val}:
            raise DegenerateSplit("train and val share sample ids")
        if {s.text for s in self.train} & {s.text for s in self.val}:
            raise DegenerateSplit("train and val share sample texts")
        if any(not s.is_seed for s in self.val):
            raise DegenerateSplit("validation set must hold seed samples only")


def parse_records(lines: Iterable[str], taxonomy: Taxonomy) -> list[LabeledSample]:
    samples = []
    for line in lines:
        if not line.strip():
            continue
        index = len(samples)
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(index, f"invalid JSON ({exc.msg})") from None
        if not isinstance(record, dict) or "text" not in record or "label" not in record:
            raise MalformedRecord(index, "expected an object with 'text' and 'label'")
        text, label = record["text"], record["label"]
        if not isinstance(text, str) or not isinstance(label, str):
            raise MalformedRecord(index, "'text' and 'label' must be strings")
        if not text.strip():
            raise EmptyText(index)
        label_id = taxonomy.index(label)
        if label_id is None:
            raise UnknownLabel(index, label)
        samples.append(LabeledSample(id=index, text=text, label=label_id))
    return samples


def load_dataset(path: str | Path, taxonomy: Taxonomy) -> list[LabeledSample]:
    """Read a JSONL dataset; ids follow file order starting at 0."""
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh, taxonomy)


def dump_records(samples: Iterable[LabeledSample], taxonomy: Taxonomy) -> str:
    return "".join(
        json.dumps({"text": s.text, "label": taxonomy.name(s.label)}, ensure_ascii=False) + "\n"
        for s in samples
    )


def save_dataset(path: str | Path, samples: Iterable[LabeledSample], taxonomy: Taxonomy) -> None:
    Path(path).write_text(dump_records(samples, taxonomy), encoding="utf-8")


def sample_seed_set(
    pool: Sequence[LabeledSample], n: int = DEFAULT_SEED_SET_SIZE, seed: int = 0
) -> list[LabeledSample]:
    """Uniform sample of ``n`` items without replacement, returned in pool order."""
    if n > len(pool):
        raise InsufficientPool(n, len(pool))
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(pool), size=n, replace=False))
    return [pool[i] for i in chosen]


def split(
    samples: Sequence[LabeledSample],
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    seed: int = 0,
) -> DatasetSplit:
    """Seeded shuffle, then the first ``floor(train_fraction * N)`` go to train.

    Samples sharing an exact text always land on the same side, so with
    duplicate texts the sizes can drift from the nominal cut.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    if len(samples) < 2:
        raise DegenerateSplit("need at least two samples to split")
    n_train = math.floor(train_fraction * len(samples))
    order = np.random.default_rng(seed).permutation(len(samples))
    side: dict[str, bool] = {}
    train, val = [], []
    for i in order:
        s = samples[i]
        to_train = side.setdefault(s.text, len(train) < n_train)
        (train if to_train else val).append(s)
    return DatasetSplit(train=tuple(train), val=tuple(val))
