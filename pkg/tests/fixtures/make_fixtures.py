"""Regenerate the fixture corpus and golden prompts.

    python tests/fixtures/make_fixtures.py

Golden prompts are frozen on purpose: rerun only after a deliberate template
change, and review the diff by eye.
"""

from pathlib import Path

from pgkd.corpus import save_dataset
from pgkd.evaluation import classification_report, render_report
from pgkd.synthetic import SyntheticCorpus, SyntheticSpec
from pgkd.teacher import PromptContext, build_pgkd_prompt, build_zero_shot_prompt

HERE = Path(__file__).parent
AG_NEWS = ("World", "Sports", "Business", "Sci/Tech")


def golden_context() -> PromptContext:
    gen = SyntheticCorpus(SyntheticSpec(n_classes=4), seed=7, class_names=AG_NEWS)
    tax = gen.taxonomy
    s = gen.sample(12)
    report = classification_report([0, 0, 1, 1, 2, 3], [0, 1, 1, 1, 3, 3], len(tax))
    return PromptContext(
        taxonomy=tax,
        few_shot=s[:4],
        gen_batch_size=32,
        report_text=render_report(report, tax),
        correct=[(s[4], s[4].label), (s[5], s[5].label)],
        incorrect=[(s[6], (s[6].label + 1) % 4), (s[7], (s[7].label + 2) % 4)],
        hard_negatives=[(s[7], (s[7].label + 2) % 4, 0.91), (s[6], (s[6].label + 1) % 4, 0.64)],
    )


def main() -> None:
    gen = SyntheticCorpus(SyntheticSpec(n_classes=4), seed=2024, class_names=AG_NEWS)
    gen.taxonomy.save(HERE / "agnews_taxonomy.txt")
    save_dataset(HERE / "agnews_mini.jsonl", gen.sample(3000), gen.taxonomy)

    golden = HERE / "golden"
    golden.mkdir(exist_ok=True)
    ctx = golden_context()
    (golden / "pgkd_prompt.txt").write_text(build_pgkd_prompt(ctx))
    no_val = PromptContext(**{**ctx.__dict__, "report_text": None})
    (golden / "pgkd_prompt_no_validation.txt").write_text(build_pgkd_prompt(no_val))
    no_hn = PromptContext(**{**ctx.__dict__, "hard_negatives": None})
    (golden / "pgkd_prompt_no_hard_negatives.txt").write_text(build_pgkd_prompt(no_hn))
    text = ctx.few_shot[0].text
    (golden / "zero_shot_prompt.txt").write_text(build_zero_shot_prompt(ctx.taxonomy, text))


if __name__ == "__main__":
    main()

