"""The distillation loop: train, evaluate, ask the teacher for data, retrain, with early stopping."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import DatasetSplit, LabeledSample, Taxonomy
from .evaluation import (
    ClassificationReport,
    evaluate,
    mine_hard_negatives,
    partition,
    predict,
    render_report,
)
from .student import FeaturizerConfig, StudentConfig, StudentModel, train
from .teacher import PromptContext, TeacherBackend, generate, stratified_subset

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class PGKDConfig:
    num_kd_steps: int = 10
    patience_limit: int = 5
    gen_batch_size: int = 32
    few_shot_k: int = 16
    correct_k: int = 16
    incorrect_k: int = 16
    hard_negative_k: int = 16
    use_validation_report: bool = True
    use_hard_negatives: bool = True
    retries: int = 2
    seed: int = 0
    # Warm-start each step from the previous student instead of retraining from zeros.
    incremental: bool = False

    def __post_init__(self):
        if self.num_kd_steps < 0 or self.patience_limit < 0 or self.retries < 0:
            raise ValueError("num_kd_steps, patience_limit and retries must be >= 0")
        counts = (self.gen_batch_size, self.few_shot_k, self.correct_k, self.incorrect_k)
        if min(counts) < 1 or self.hard_negative_k < 0:
            raise ValueError("generation and prompt subset sizes must be positive")


@dataclass
class StepRecord:
    step: int
    val_loss: float
    report: ClassificationReport
    history_size: int
    improved: bool
    patience_counter: int
    generated: int = 0
    accepted: int = 0
    rejected: int = 0
    rejection_reasons: dict[str, int] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    input_tokens: int = 0
    output_tokens: int = 0
    prompt_sha256: str | None = None
    train_epochs: int = 0
    train_best_epoch: int = 0
    duration_s: float | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        d["report"] = self.report.to_dict()
        if not include_timing:
            d.pop("duration_s")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        d = dict(d)
        d["report"] = ClassificationReport.from_dict(d["report"])
        return cls(**d)


@dataclass
class RunManifest:
    config: dict
    student_config: dict
    featurizer: dict
    taxonomy: list[str]
    seed_train_ids: list[int]
    val_ids: list[int]
    steps: list[StepRecord] = field(default_factory=list)
    best_step: int = 0
    best_val_loss: float = float("inf")
    stopped_early: bool = False
    final_report: ClassificationReport | None = None
    test_report: ClassificationReport | None = None
    base_test_report: ClassificationReport | None = None

    @property
    def val_losses(self) -> list[float]:
        return [s.val_loss for s in self.steps]

    @property
    def total_input_tokens(self) -> int:
        return sum(s.input_tokens for s in self.steps)

    @property
    def total_output_tokens(self) -> int:
        return sum(s.output_tokens for s in self.steps)

    def to_dict(self, include_timing: bool = False) -> dict:
        def rep(r):
            return None if r is None else r.to_dict()

        return {
            "version": MANIFEST_VERSION,
            "config": self.config,
            "student_config": self.student_config,
            "featurizer": self.featurizer,
            "taxonomy": self.taxonomy,
            "seed_train_ids": self.seed_train_ids,
            "val_ids": self.val_ids,
            "steps": [s.to_dict(include_timing) for s in self.steps],
            "best_step": self.best_step,
            "best_val_loss": self.best_val_loss,
            "stopped_early": self.stopped_early,
            "final_report": rep(self.final_report),
            "test_report": rep(self.test_report),
            "base_test_report": rep(self.base_test_report),
        }

    def to_json(self, include_timing: bool = False) -> str:
        """Serialized manifest. Timings are left out by default so equal runs give equal bytes."""
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        def rep(r):
            return None if r is None else ClassificationReport.from_dict(r)

        return cls(
            config=d["config"],
            student_config=d["student_config"],
            featurizer=d["featurizer"],
            taxonomy=d["taxonomy"],
            seed_train_ids=d["seed_train_ids"],
            val_ids=d["val_ids"],
            steps=[StepRecord.from_dict(s) for s in d["steps"]],
            best_step=d["best_step"],
            best_val_loss=d["best_val_loss"],
            stopped_early=d["stopped_early"],
            final_report=rep(d["final_report"]),
            test_report=rep(d["test_report"]),
            base_test_report=rep(d.get("base_test_report")),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls.from_dict(json.loads(text))

    def metrics_csv(self) -> str:
        cols = [
            "step", "val_loss", "accuracy", "macro_f1", "weighted_f1", "generated",
            "accepted", "rejected", "input_tokens", "output_tokens", "history_size",
        ]  # fmt: skip
        lines = [",".join(cols)]
        for s in self.steps:
            r = s.report
            row = [
                s.step, repr(s.val_loss), repr(r.accuracy), repr(r.macro_f1), repr(r.weighted_f1),
                s.generated, s.accepted, s.rejected, s.input_tokens, s.output_tokens,
                s.history_size,
            ]  # fmt: skip
            lines.append(",".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def replay_early_stopping(losses: Sequence[float], patience_limit: int) -> tuple[int, int, bool]:
    """Apply the stopping rule to a loss column.

    ``losses[0]`` is the baseline. Returns ``(best_step, last_step, stopped_early)``
    where ``last_step`` is the index at which the rule stops reading.
    """
    best, best_step, counter = losses[0], 0, 0
    for i, value in enumerate(losses[1:], start=1):
        if value > best:
            counter += 1
            if counter > patience_limit:
                return best_step, i, True
        else:
            best, best_step, counter = value, i, 0
    return best_step, len(losses) - 1, False


def verify_manifest(manifest: RunManifest) -> list[str]:
    """Check a manifest's bookkeeping without re-running anything. Returns problems found."""
    problems = []
    steps = manifest.steps
    if not steps or steps[0].step != 0:
        return ["manifest has no baseline step"]
    losses = manifest.val_losses
    limit = manifest.config["patience_limit"]
    best_step, last, stopped = replay_early_stopping(losses, limit)
    if last != len(losses) - 1:
        problems.append(f"run continued past step {last} where the stopping rule fires")
    if stopped != manifest.stopped_early:
        problems.append("stopped_early flag disagrees with the stopping rule")
    if not stopped and len(steps) - 1 != manifest.config["num_kd_steps"]:
        problems.append("run ended before num_kd_steps without an early stop")
    if best_step != manifest.best_step:
        problems.append(f"best_step {manifest.best_step} but the rule selects {best_step}")
    if manifest.best_val_loss != min(losses):
        problems.append("best_val_loss is not the minimum recorded validation loss")
    for prev, cur in zip(steps, steps[1:]):
        if cur.step != prev.step + 1:
            problems.append(f"step numbering jumps from {prev.step} to {cur.step}")
        if cur.history_size != prev.history_size + cur.accepted:
            problems.append(f"history size at step {cur.step} does not add up")
    return problems


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _labels(samples: Sequence[LabeledSample]) -> list[int]:
    return [s.label for s in samples]


def run_pgkd(
    split: DatasetSplit,
    student_config: StudentConfig,
    teacher: TeacherBackend,
    config: PGKDConfig,
    taxonomy: Taxonomy,
    featurizer: FeaturizerConfig | None = None,
    test: Sequence[LabeledSample] | None = None,
) -> tuple[StudentModel, RunManifest]:
    """Run the performance-guided distillation loop and return the best student.

    Step 0 trains on the seed training set. Each later step shows the teacher
    the latest validation report plus correct, misclassified and hard-negative
    training samples, appends the accepted generations to the history, and
    retrains. The loop stops after ``num_kd_steps`` steps or once the
    validation loss has been worse than the best for ``patience_limit + 1``
    steps in a row. Teacher failures only yield an empty step.
    """
    featurizer = featurizer or FeaturizerConfig()
    val = list(split.val)
    seed_train = list(split.train)
    history: list[LabeledSample] = list(seed_train)
    forbidden = {s.text for s in history} | {s.text for s in val}
    next_id = max(s.id for s in history + val) + 1

    manifest = RunManifest(
        config=asdict(config),
        student_config=asdict(student_config),
        featurizer={**asdict(featurizer), "ngram_orders": list(featurizer.ngram_orders)},
        taxonomy=list(taxonomy.classes),
        seed_train_ids=[s.id for s in seed_train],
        val_ids=[s.id for s in val],
    )

    t0 = time.perf_counter()
    current, tlog = train(history, val, student_config, taxonomy, featurizer)
    val_loss, val_report, _ = evaluate(current, val)
    manifest.steps.append(
        StepRecord(
            step=0,
            val_loss=val_loss,
            report=val_report,
            history_size=len(history),
            improved=True,
            patience_counter=0,
            train_epochs=tlog.stopped_epoch,
            train_best_epoch=tlog.best_epoch,
            duration_s=time.perf_counter() - t0,
        )
    )
    log.info("step 0: val_loss=%.4f acc=%.3f", val_loss, val_report.accuracy)
    base_model = current
    best_model, best_loss, best_step = current, val_loss, 0
    patience_counter = 0

    for step in range(1, config.num_kd_steps + 1):
        t0 = time.perf_counter()
        rng = np.random.default_rng([config.seed, step])
        by_id = {s.id: s for s in history}
        records = predict(current, history)
        predicted = {r.sample_id: r.predicted_label for r in records}
        correct, incorrect = partition(records, by_id)
        correct = stratified_subset(correct, _labels(correct), config.correct_k, rng)
        incorrect = stratified_subset(incorrect, _labels(incorrect), config.incorrect_k, rng)
        hard = (
            mine_hard_negatives(records, by_id, config.hard_negative_k)
            if config.use_hard_negatives
            else None
        )
        ctx = PromptContext(
            taxonomy=taxonomy,
            few_shot=stratified_subset(seed_train, _labels(seed_train), config.few_shot_k, rng),
            gen_batch_size=config.gen_batch_size,
            report_text=render_report(val_report, taxonomy) if config.use_validation_report else None,
            correct=[(s, predicted[s.id]) for s in correct],
            incorrect=[(s, predicted[s.id]) for s in incorrect],
            hard_negatives=hard,
        )
        batch = generate(
            teacher, ctx, config.retries, step=step, history_texts=forbidden, next_id=next_id
        )
        history.extend(batch.accepted)
        forbidden.update(s.text for s in batch.accepted)
        next_id += len(batch.accepted)

        current, tlog = train(
            history,
            val,
            student_config,
            taxonomy,
            featurizer,
            init=current if config.incremental else None,
        )
        val_loss, val_report, _ = evaluate(current, val)
        improved = not val_loss > best_loss
        if improved:
            best_model, best_loss, best_step = current, val_loss, step
            patience_counter = 0
        else:
            patience_counter += 1
        manifest.steps.append(
            StepRecord(
                step=step,
                val_loss=val_loss,
                report=val_report,
                history_size=len(history),
                improved=improved,
                patience_counter=patience_counter,
                generated=batch.generated,
                accepted=len(batch.accepted),
                rejected=len(batch.rejected),
                rejection_reasons=dict(
                    sorted(Counter(r.reason.value for r in batch.rejected).items())
                ),
                failures=list(batch.failures),
                input_tokens=batch.input_tokens,
                output_tokens=batch.output_tokens,
                prompt_sha256=_sha256(batch.prompt),
                train_epochs=tlog.stopped_epoch,
                train_best_epoch=tlog.best_epoch,
                duration_s=time.perf_counter() - t0,
            )
        )
        log.info(
            "step %d: accepted=%d val_loss=%.4f acc=%.3f patience=%d",
            step, len(batch.accepted), val_loss, val_report.accuracy, patience_counter,
        )  # fmt: skip
        if patience_counter > config.patience_limit:
            manifest.stopped_early = True
            break

    manifest.best_step = best_step
    manifest.best_val_loss = best_loss
    manifest.final_report = manifest.steps[best_step].report
    if test:
        manifest.test_report = evaluate(best_model, test)[1]
        manifest.base_test_report = evaluate(base_model, test)[1]
    return best_model, manifest
