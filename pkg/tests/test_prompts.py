import difflib
from dataclasses import replace

import pytest

from pgkd.corpus import LabeledSample
from pgkd.errors import EmptyFewShot, EmptyText
from pgkd.teacher.prompts import (
    EMPTY_BLOCK,
    PGKD_HARD_NEGATIVE_BLOCK,
    PGKD_REPORT_BLOCK,
    PromptContext,
    build_pgkd_prompt,
    build_zero_shot_prompt,
    render_predicted,
)

from fixtures.make_fixtures import golden_context
from helpers import GOLDEN


@pytest.fixture
def ctx() -> PromptContext:
    return golden_context()


def _line_diff(full: str, ablated: str) -> tuple[list[str], list[str]]:
    diff = list(difflib.ndiff(full.splitlines(), ablated.splitlines()))
    removed = [line[2:] for line in diff if line.startswith("- ")]
    added = [line[2:] for line in diff if line.startswith("+ ")]
    return removed, added


def test_pgkd_prompt_matches_golden(ctx):
    assert build_pgkd_prompt(ctx) == (GOLDEN / "pgkd_prompt.txt").read_text()


def test_ablated_prompts_match_golden(ctx):
    no_val = build_pgkd_prompt(replace(ctx, report_text=None))
    no_hn = build_pgkd_prompt(replace(ctx, hard_negatives=None))
    assert no_val == (GOLDEN / "pgkd_prompt_no_validation.txt").read_text()
    assert no_hn == (GOLDEN / "pgkd_prompt_no_hard_negatives.txt").read_text()


def test_zero_shot_prompt_matches_golden(ctx):
    text = ctx.few_shot[0].text
    assert build_zero_shot_prompt(ctx.taxonomy, text) == (GOLDEN / "zero_shot_prompt.txt").read_text()


def test_full_prompt_contents(ctx):
    prompt = build_pgkd_prompt(ctx)
    assert prompt.startswith("Human:\n") and prompt.endswith("Assistant:")
    assert "please generate 32 training samples" in prompt
    assert "classification report over validation set is:" in prompt
    assert "high confidence in classifying the following misclassified examples" in prompt
    assert ctx.report_text in prompt
    for name in ctx.taxonomy.classes:
        assert f"- {name}\n" in prompt
    for s in ctx.few_shot:
        assert s.text in prompt


def test_without_validation_removes_exactly_the_report(ctx):
    full = build_pgkd_prompt(ctx)
    ablated = build_pgkd_prompt(replace(ctx, report_text=None))
    assert ablated == full.replace(PGKD_REPORT_BLOCK.format(report=ctx.report_text), "")
    assert "classification report" not in ablated
    assert "precision" not in ablated
    removed, added = _line_diff(full, ablated)
    # Only the instruction line is rewritten: it loses its trailing report clause.
    assert len(added) == 1 and added[0].endswith("The objective is to maximize the model accuracy")
    assert removed == [added[0] + ", generate new samples knowing that the classification report"
                       " over validation set is:"] + ctx.report_text.splitlines()


def test_without_hard_negatives_removes_exactly_that_block(ctx):
    full = build_pgkd_prompt(ctx)
    ablated = build_pgkd_prompt(replace(ctx, hard_negatives=None))
    block = PGKD_HARD_NEGATIVE_BLOCK.format(
        hard_negatives=render_predicted(ctx.hard_negatives, ctx.taxonomy)
    )
    assert ablated == full.replace(block, "")
    assert "high confidence" not in ablated
    assert _line_diff(full, ablated) == (block.splitlines(), [])


def test_empty_lists_render_placeholder(ctx):
    prompt = build_pgkd_prompt(replace(ctx, correct=(), incorrect=(), hard_negatives=()))
    assert prompt.count(EMPTY_BLOCK) == 3


def test_batch_size_is_substituted(ctx):
    assert "please generate 7 training samples" in build_pgkd_prompt(replace(ctx, gen_batch_size=7))


def test_empty_few_shot_raises(ctx):
    with pytest.raises(EmptyFewShot):
        build_pgkd_prompt(replace(ctx, few_shot=()))


def test_zero_shot_contents(ctx):
    prompt = build_zero_shot_prompt(ctx.taxonomy, "Oil prices climb again")
    assert "Text-to-classifiy: \nOil prices climb again\nAssistant:" in prompt
    assert '"class_label": ,\n"class_names": ""' in prompt
    for name in ctx.taxonomy.classes:
        assert f"- {name}" in prompt


@pytest.mark.parametrize("text", ["", "  \n "])
def test_zero_shot_empty_text(ctx, text):
    with pytest.raises(EmptyText):
        build_zero_shot_prompt(ctx.taxonomy, text)


def test_sample_text_is_json_escaped(ctx):
    tricky = LabeledSample(99, 'quote " and\nnewline', 0)
    prompt = build_pgkd_prompt(replace(ctx, few_shot=(tricky,)))
    assert '"quote \\" and\\nnewline"' in prompt
