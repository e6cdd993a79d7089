"""Classification metrics, validation reports and hard-negative mining."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from . import student as student_mod
from .corpus import LabeledSample, Taxonomy
from .errors import DanglingId, EmptyDataset

DEFAULT_HARD_NEGATIVES = 16

_HEADER_COLUMNS = ("precision", "recall", "f1-score", "support")


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: int
    true_label: int
    predicted_label: int
    confidence: float

    @property
    def correct(self) -> bool:
        return self.predicted_label == self.true_label


@dataclass(frozen=True)
class ClassificationReport:
    """Per-class and aggregate metrics over every class of a taxonomy.

    Classes without support and without predictions get zero precision,
    recall and F1; macro averages still include them.
    """

    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    @property
    def total(self) -> int:
        return sum(self.support)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassificationReport":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def classification_report(
    y_true: Sequence[int], y_pred: Sequence[int], n_classes: int
) -> ClassificationReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    if len(y_true) == 0:
        raise EmptyDataset("cannot report on zero predictions")
    hit = y_true == y_pred
    tp = np.bincount(y_true[hit], minlength=n_classes).astype(np.float64)
    support = np.bincount(y_true, minlength=n_classes)
    predicted = np.bincount(y_pred, minlength=n_classes)
    precision = _safe_div(tp, predicted.astype(np.float64))
    recall = _safe_div(tp, support.astype(np.float64))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    weights = support / support.sum()
    return ClassificationReport(
        precision=tuple(precision.tolist()),
        recall=tuple(recall.tolist()),
        f1=tuple(f1.tolist()),
        support=tuple(int(s) for s in support),
        accuracy=float(hit.sum() / len(y_true)),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float(weights @ precision),
        weighted_recall=float(weights @ recall),
        weighted_f1=float(weights @ f1),
    )


def predict(model, data: Sequence[LabeledSample]) -> list[PredictionRecord]:
    proba = model.predict_proba_many([s.text for s in data])
    pred = proba.argmax(axis=1)
    conf = proba[np.arange(len(data)), pred]
    return [
        PredictionRecord(s.id, s.label, int(p), float(c)) for s, p, c in zip(data, pred, conf)
    ]


def evaluate(model, data: Sequence[LabeledSample]):
    """Return ``(loss, report, records)`` for ``model`` on ``data``."""
    if not data:
        raise EmptyDataset("evaluate needs at least one sample")
    records = predict(model, data)
    report = classification_report(
        [r.true_label for r in records],
        [r.predicted_label for r in records],
        len(model.taxonomy),
    )
    return student_mod.loss(model, data), report, records


def _resolve(records, samples: Mapping[int, LabeledSample]):
    for r in sorted(records, key=lambda r: r.sample_id):
        if r.sample_id not in samples:
            raise DanglingId(r.sample_id)
        yield r, samples[r.sample_id]


def partition(
    records: Sequence[PredictionRecord], samples: Mapping[int, LabeledSample]
) -> tuple[list[LabeledSample], list[LabeledSample]]:
    correct, incorrect = [], []
    for r, s in _resolve(records, samples):
        (correct if r.correct else incorrect).append(s)
    return correct, incorrect


def mine_hard_negatives(
    records: Sequence[PredictionRecord],
    samples: Mapping[int, LabeledSample],
    k: int = DEFAULT_HARD_NEGATIVES,
) -> list[tuple[LabeledSample, int, float]]:
    """Misclassified samples the student is most confident about, top ``k``.

    Ordered by confidence descending, ties by ascending sample id.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    wrong = [r for r in records if not r.correct]
    wrong.sort(key=lambda r: (-r.confidence, r.sample_id))
    out = []
    for r in wrong[:k]:
        if r.sample_id not in samples:
            raise DanglingId(r.sample_id)
        out.append((samples[r.sample_id], r.predicted_label, r.confidence))
    return out


def render_report(report: ClassificationReport, taxonomy: Taxonomy) -> str:
    """Fixed-width text table, one row per class then accuracy/macro/weighted rows."""
    width = max(len("weighted avg"), *(len(c) for c in taxonomy.classes))
    head = f"{'':<{width}}  {'precision':>9}  {'recall':>9}  {'f1-score':>9}  {'support':>7}"
    lines = [head.rstrip(), ""]
    for i, name in enumerate(taxonomy.classes):
        lines.append(
            f"{name:<{width}}  {report.precision[i]:>9.3f}  {report.recall[i]:>9.3f}"
            f"  {report.f1[i]:>9.3f}  {report.support[i]:>7d}"
        )
    total = report.total
    lines.append("")
    lines.append(f"{'accuracy':<{width}}  {'':>9}  {'':>9}  {report.accuracy:>9.3f}  {total:>7d}")
    lines.append(
        f"{'macro avg':<{width}}  {report.macro_precision:>9.3f}  {report.macro_recall:>9.3f}"
        f"  {report.macro_f1:>9.3f}  {total:>7d}"
    )
    lines.append(
        f"{'weighted avg':<{width}}  {report.weighted_precision:>9.3f}"
        f"  {report.weighted_recall:>9.3f}  {report.weighted_f1:>9.3f}  {total:>7d}"
    )
    return "\n".join(lines)


def parse_report(text: str, taxonomy: Taxonomy) -> dict | None:
    """Recover the rounded values of a rendered report embedded in ``text``.

    Returns None when no report table is found.
    """
    lines = text.splitlines()
    for start, line in enumerate(lines):
        if tuple(line.split()) == _HEADER_COLUMNS:
            break
    else:
        return None
    body = lines[start + 2 : start + 2 + len(taxonomy)]
    if len(body) != len(taxonomy):
        return None
    rows = {}
    for name, row in zip(taxonomy.classes, body):
        parts = row.rsplit(None, 4)
        if len(parts) != 5 or parts[0].strip() != name:
            return None
        p, r, f, s = parts[1:]
        rows[name] = (float(p), float(r), float(f), int(s))
    tail = lines[start + 3 + len(taxonomy) : start + 6 + len(taxonomy)]
    summary = {}
    for label, row in zip(("accuracy", "macro avg", "weighted avg"), tail):
        if not row.startswith(label):
            return None
        summary[label] = tuple(float(x) for x in row[len(label) :].split())
    if len(summary) != 3:
        return None
    return {
        "classes": rows,
        "accuracy": summary["accuracy"][0],
        "macro": summary["macro avg"][:3],
        "weighted": summary["weighted avg"][:3],
        "total": int(summary["accuracy"][1]),
    }
