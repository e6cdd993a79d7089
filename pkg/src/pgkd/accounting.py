"""Teacher cost and student/teacher inference latency accounting."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Sequence

INFERENCE_BATCH = 64


@dataclass(frozen=True)
class Pricing:
    """Dollar rates per 1000 tokens."""

    input_per_1k: float
    output_per_1k: float

    def __post_init__(self):
        if self.input_per_1k < 0 or self.output_per_1k < 0:
            raise ValueError("token rates must be non-negative")


@dataclass(frozen=True)
class CostRow:
    method: str
    batch: int | None
    latency_s: float | None
    cost_usd: float


@dataclass(frozen=True)
class CostReport:
    rows: tuple[CostRow, ...]
    teacher_input_tokens: int
    teacher_output_tokens: int
    teacher_cost_usd: float


def token_cost(input_tokens: float, output_tokens: float, pricing: Pricing) -> float:
    return input_tokens * pricing.input_per_1k / 1000 + output_tokens * pricing.output_per_1k / 1000


def measure_latency(model, texts: Sequence[str], batch_size: int = INFERENCE_BATCH, repeats: int = 5):
    """Wall-clock seconds for ``repeats`` predictions of one ``batch_size`` batch."""
    batch = list(texts[:batch_size])
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model.predict_proba_many(batch)
        timings.append(time.perf_counter() - t0)
    return timings


def estimate_cost_latency(
    manifest,
    pricing: Pricing,
    student_latency_s: Sequence[float] | None = None,
    instance_cost_per_hour: float = 0.0,
    zero_shot_tokens: tuple[float, float] | None = None,
    zero_shot_latency_s: Sequence[float] | None = None,
    batch_size: int = INFERENCE_BATCH,
) -> CostReport:
    """Cost of the distillation run's teacher calls plus per-batch inference figures.

    ``student_latency_s`` are measured timings of one inference batch; their
    mean prices at ``instance_cost_per_hour``. ``zero_shot_tokens`` is the mean
    (input, output) token count of one zero-shot call, priced per batch.
    """
    n_in, n_out = manifest.total_input_tokens, manifest.total_output_tokens
    teacher_cost = token_cost(n_in, n_out, pricing)
    durations = [s.duration_s for s in manifest.steps]
    run_latency = sum(durations) if all(d is not None for d in durations) else None
    rows = []
    if student_latency_s:
        lat = statistics.fmean(student_latency_s)
        rows.append(CostRow("Student + PGKD", batch_size, lat, lat * instance_cost_per_hour / 3600))
    if zero_shot_tokens is not None:
        per_call = token_cost(zero_shot_tokens[0], zero_shot_tokens[1], pricing)
        lat = statistics.fmean(zero_shot_latency_s) if zero_shot_latency_s else None
        rows.append(CostRow("Teacher zero-shot", batch_size, lat, per_call * batch_size))
    rows.append(CostRow("PGKD distillation (teacher calls)", None, run_latency, teacher_cost))
    return CostReport(tuple(rows), n_in, n_out, teacher_cost)


def render_cost_table(report: CostReport) -> str:
    lines = ["| Method | Batch | Latency (s) | Cost ($) |", "|---|---|---|---|"]
    for r in report.rows:
        batch = "-" if r.batch is None else str(r.batch)
        lat = "n/a" if r.latency_s is None else f"{r.latency_s:.2f}"
        lines.append(f"| {r.method} | {batch} | {lat} | {r.cost_usd:.4f} |")
    return "\n".join(lines) + "\n"
