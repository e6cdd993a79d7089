"""Teacher prompt templates and the context they are filled from."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from ..corpus import LabeledSample, Taxonomy
from ..errors import EmptyFewShot, EmptyText

DEFAULT_GEN_BATCH_SIZE = 32
DEFAULT_SUBSET_SIZE = 16

PGKD_HEADER = (
    "Human:\n"
    "You are a Teacher model for a Student LM to perform topic detection on the following taxonomy: \n"
    "{taxonomy}\n"
    "Here are a few labeled examples that show the correct label for this task:\n"
    "{few_shot}\n"
    "Given the current model performance, please generate {batch_size} training samples for the model "
    "to improve its performance. The response should be a list of dictionaries in JSON format, the "
    "response needs to be parsable so do not output anything else rather than the response itself. "
    "The objective is to maximize the model accuracy"
)
# Dropped as a unit when the validation report is disabled.
PGKD_REPORT_BLOCK = (
    ", generate new samples knowing that the classification report over validation set is:\n"
    "{report}"
)
PGKD_SAMPLES = (
    "\n"
    "Please consider a few samples that the model was able to classify correctly:\n"
    "{correct}\n"
    "And samples the model was not able to classify correctly: \n"
    "{incorrect}\n"
)
# Dropped as a unit when hard negatives are disabled.
PGKD_HARD_NEGATIVE_BLOCK = (
    "The model has a high confidence in classifying the following misclassified examples:\n"
    "{hard_negatives}\n"
)
PGKD_FOOTER = "Assistant:"

ZERO_SHOT_TEMPLATE = (
    "Human:\n"
    "You are an AI assistant, and you are tasked to perform topic classification starting from text. "
    "You are asked to classify text in topics categories. You are only allowed to choose one of the "
    "following categories:\n"
    "{taxonomy}\n"
    "Please provide only one category for each text in JSON format. For example: \n"
    '"class_label": ,\n'
    '"class_names": ""\n'
    "Please do not repeat or return the content back again, just provide the category in the "
    "defined format.\n"
    "Text-to-classifiy: \n"
    "{text}\n"
    "Assistant:"
)

EMPTY_BLOCK = "(none)"


@dataclass(frozen=True)
class PromptContext:
    """Everything a PGKD prompt is built from.

    ``report_text`` and ``hard_negatives`` are None when the corresponding
    mechanism is ablated; an empty list still renders its block.
    """

    taxonomy: Taxonomy
    few_shot: Sequence[LabeledSample]
    gen_batch_size: int = DEFAULT_GEN_BATCH_SIZE
    report_text: str | None = None
    correct: Sequence[tuple[LabeledSample, int]] = ()
    incorrect: Sequence[tuple[LabeledSample, int]] = ()
    hard_negatives: Sequence[tuple[LabeledSample, int, float]] | None = ()


def render_taxonomy(taxonomy: Taxonomy) -> str:
    return "\n".join(f"- {name}" for name in taxonomy.classes)


def _render_samples(rows: list[dict]) -> str:
    if not rows:
        return EMPTY_BLOCK
    return "\n".join(json.dumps(r, ensure_ascii=False) for r in rows)


def render_labeled(samples: Sequence[LabeledSample], taxonomy: Taxonomy) -> str:
    return _render_samples([{"text": s.text, "label": taxonomy.name(s.label)} for s in samples])


def render_predicted(pairs, taxonomy: Taxonomy) -> str:
    """Render (sample, predicted, ...) tuples with true and student-predicted labels."""
    return _render_samples(
        [
            {
                "text": p[0].text,
                "label": taxonomy.name(p[0].label),
                "predicted": taxonomy.name(p[1]),
            }
            for p in pairs
        ]
    )


def build_pgkd_prompt(ctx: PromptContext) -> str:
    if not ctx.few_shot:
        raise EmptyFewShot("the PGKD prompt needs at least one few-shot sample")
    tax = ctx.taxonomy
    parts = [
        PGKD_HEADER.format(
            taxonomy=render_taxonomy(tax),
            few_shot=render_labeled(ctx.few_shot, tax),
            batch_size=ctx.gen_batch_size,
        )
    ]
    if ctx.report_text is not None:
        parts.append(PGKD_REPORT_BLOCK.format(report=ctx.report_text))
    parts.append(
        PGKD_SAMPLES.format(
            correct=render_predicted(ctx.correct, tax),
            incorrect=render_predicted(ctx.incorrect, tax),
        )
    )
    if ctx.hard_negatives is not None:
        parts.append(
            PGKD_HARD_NEGATIVE_BLOCK.format(hard_negatives=render_predicted(ctx.hard_negatives, tax))
        )
    parts.append(PGKD_FOOTER)
    return "".join(parts)


def build_zero_shot_prompt(taxonomy: Taxonomy, text: str) -> str:
    if not text.strip():
        raise EmptyText()
    return ZERO_SHOT_TEMPLATE.format(taxonomy=render_taxonomy(taxonomy), text=text)
