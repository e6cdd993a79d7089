"""Command-line entry points.

Every command reads a dataset + taxonomy, optionally a YAML config, and
writes its outputs under ``--out``; per-seed artifacts go to ``seed_<n>/``
subdirectories. Value precedence is: command-line flags, then the config
file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import yaml

from .accounting import Pricing, estimate_cost_latency, measure_latency, render_cost_table
from .corpus import (
    LabeledSample,
    Taxonomy,
    load_dataset,
    sample_seed_set,
    split,
)
from .errors import PGKDError
from .evaluation import classification_report, evaluate, render_report
from .loop import PGKDConfig, RunManifest, run_pgkd
from .student import FeaturizerConfig, StudentConfig, train
from .teacher import (
    ConstantBackend,
    HTTPChatBackend,
    HTTPConfig,
    MockOracleBackend,
    OracleClassifierBackend,
    RecordingBackend,
    build_zero_shot_prompt,
    count_tokens,
    zero_shot_classify,
)

log = logging.getLogger("pgkd")

DEFAULTS: dict = {
    "seed_size": 1000,
    "seeds": [0, 1, 2, 3, 4],
    "train_fraction": 0.8,
    "test_fraction": 0.2,
    "holdout_seed": 0,
    "workers": 1,
    "student": {"epochs": 30, "batch_size": 64, "learning_rate": 1.0, "patience": 5},
    "featurizer": {"ngram_orders": [1, 2], "dimension": 65536, "hash_seed": 0},
    "pgkd": {
        "num_kd_steps": 10,
        "patience_limit": 5,
        "gen_batch_size": 32,
        "few_shot_k": 16,
        "correct_k": 16,
        "incorrect_k": 16,
        "hard_negative_k": 16,
        "use_validation_report": True,
        "use_hard_negatives": True,
        "retries": 2,
        "incremental": False,
    },
    "teacher": {
        "kind": "mock",
        "quality": 0.0,
        "response": "",
        "http": {
            "endpoint": "http://localhost:8000/v1/chat/completions",
            "model": "teacher",
            "temperature": 0.0,
            "max_tokens": 4096,
            "timeout": 120.0,
            "api_key_env": "OPENAI_API_KEY",
        },
    },
    "pricing": {"input_per_1k": 0.003, "output_per_1k": 0.015, "instance_cost_per_hour": 0.0},
}

VARIANTS = {
    "PGKD": (True, True),
    "w/o Validation": (False, True),
    "w/o Hard Negatives": (True, False),
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunSpec:
    dataset: Path
    taxonomy: Path
    test: Path | None
    out: Path
    config: dict

    @property
    def seeds(self) -> list[int]:
        return list(self.config["seeds"])

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def header(self) -> str:
        return f"# config={self.config_hash} seeds={self.seeds}"


def build_spec(args: argparse.Namespace) -> RunSpec:
    cfg = DEFAULTS
    if args.config:
        cfg = deep_merge(cfg, yaml.safe_load(Path(args.config).read_text()) or {})
    overrides: dict = {}
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.seed_size is not None:
        overrides["seed_size"] = args.seed_size
    if args.workers is not None:
        overrides["workers"] = args.workers
    if getattr(args, "teacher", None):
        overrides["teacher"] = {"kind": args.teacher}
    if getattr(args, "no_validation", False):
        overrides.setdefault("pgkd", {})["use_validation_report"] = False
    if getattr(args, "no_hard_negatives", False):
        overrides.setdefault("pgkd", {})["use_hard_negatives"] = False
    cfg = deep_merge(cfg, overrides)
    if not cfg["seeds"]:
        raise SystemExit("error: at least one seed is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return RunSpec(
        dataset=Path(args.dataset),
        taxonomy=Path(args.taxonomy),
        test=Path(args.test) if args.test else None,
        out=out,
        config=cfg,
    )


def prepare_data(spec: RunSpec) -> tuple[Taxonomy, list[LabeledSample], list[LabeledSample]]:
    """Taxonomy, sampling pool and test set. Without ``--test`` a fixed slice is held out."""
    taxonomy = Taxonomy.load(spec.taxonomy)
    data = load_dataset(spec.dataset, taxonomy)
    if spec.test is not None:
        test = load_dataset(spec.test, taxonomy)
        offset = len(data)
        test = [LabeledSample(s.id + offset, s.text, s.label) for s in test]
        test_texts = {s.text for s in test}
        return taxonomy, [s for s in data if s.text not in test_texts], test
    cut = split(data, 1.0 - spec.config["test_fraction"], spec.config["holdout_seed"])
    return taxonomy, sorted(cut.train, key=lambda s: s.id), sorted(cut.val, key=lambda s: s.id)


def _student_config(cfg: dict, seed: int) -> StudentConfig:
    return StudentConfig(seed=seed, **cfg["student"])


def _featurizer(cfg: dict) -> FeaturizerConfig:
    f = dict(cfg["featurizer"])
    f["ngram_orders"] = tuple(f["ngram_orders"])
    return FeaturizerConfig(**f)


def _make_teacher(cfg: dict, taxonomy: Taxonomy, reserve, seed: int):
    t = cfg["teacher"]
    if t["kind"] == "mock":
        return MockOracleBackend(taxonomy, reserve, t["quality"], seed)
    if t["kind"] == "http":
        return HTTPChatBackend(HTTPConfig(**t["http"]))
    if t["kind"] == "constant":
        return ConstantBackend(t["response"])
    raise SystemExit(f"error: unknown teacher kind {t['kind']!r}")


def _seed_split(pool, n: int, seed: int, frac: float):
    seed_set = sample_seed_set(pool, n, seed)
    chosen = {s.id for s in seed_set}
    return split(seed_set, frac, seed), [s for s in pool if s.id not in chosen]


def _metrics(report) -> dict:
    return {"accuracy": report.accuracy, "macro_f1": report.macro_f1, "weighted_f1": report.weighted_f1}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def mean_sd(values: list[float]) -> str:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return f"{mean:.3f} ± {sd:.3f}"


def metrics_table(spec: RunSpec, rows: list[tuple[str, list[dict]]]) -> str:
    """Markdown table of mean ± sample sd over seeds for each method."""
    lines = [
        spec.header(),
        "",
        "| Method | Accuracy | Macro Avg. F1 | Weighted Avg. F1 |",
        "|---|---|---|---|",
    ]
    for name, per_seed in rows:
        cells = [mean_sd([m[k] for m in per_seed]) for k in ("accuracy", "macro_f1", "weighted_f1")]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _map(spec: RunSpec, fn, jobs: list) -> list:
    workers = int(spec.config["workers"])
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


# -- train-base ------------------------------------------------------------


def _base_job(job) -> dict:
    spec, seed = job
    cfg = spec.config
    taxonomy, pool, test = prepare_data(spec)
    data, _ = _seed_split(pool, cfg["seed_size"], seed, cfg["train_fraction"])
    model, tlog = train(data.train, data.val, _student_config(cfg, seed), taxonomy, _featurizer(cfg))
    _, report, _ = evaluate(model, test)
    out = spec.out / f"seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model_base.npz")
    _write(out / "report_base.txt", render_report(report, taxonomy) + "\n")
    return _metrics(report)


def cmd_train_base(spec: RunSpec) -> str:
    results = _map(spec, _base_job, [(spec, s) for s in spec.seeds])
    table = metrics_table(spec, [("Student (base)", results)])
    _write(spec.out / "summary_base.md", table)
    return table


# -- pgkd ------------------------------------------------------------------


def _pgkd_job(job) -> dict:
    spec, seed, variant, size, subdir = job
    cfg = copy.deepcopy(spec.config)
    use_val, use_hn = VARIANTS[variant]
    cfg["pgkd"]["use_validation_report"] &= use_val
    cfg["pgkd"]["use_hard_negatives"] &= use_hn
    taxonomy, pool, test = prepare_data(spec)
    data, reserve = _seed_split(pool, size, seed, cfg["train_fraction"])
    teacher = RecordingBackend(_make_teacher(cfg, taxonomy, reserve, seed))
    model, manifest = run_pgkd(
        data,
        _student_config(cfg, seed),
        teacher,
        PGKDConfig(seed=seed, **cfg["pgkd"]),
        taxonomy,
        _featurizer(cfg),
        test=test,
    )
    out = spec.out / subdir / f"seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model_best.npz")
    manifest_json = manifest.to_json()
    _write(out / "manifest.json", manifest_json)
    _write(out / "metrics.csv", manifest.metrics_csv())
    _write(out / "report_best.txt", render_report(manifest.test_report, taxonomy) + "\n")
    _write(
        out / "prompts.jsonl",
        "".join(json.dumps({"prompt": p}, ensure_ascii=False) + "\n" for p in teacher.prompts),
    )
    pricing = Pricing(cfg["pricing"]["input_per_1k"], cfg["pricing"]["output_per_1k"])
    # Priced from the serialized manifest, which carries no wall-clock timings.
    timeless = RunManifest.from_json(manifest_json)
    _write(out / "cost.md", render_cost_table(estimate_cost_latency(timeless, pricing)))
    return {
        "base": _metrics(manifest.base_test_report),
        "pgkd": _metrics(manifest.test_report),
        "best_step": manifest.best_step,
        "steps": len(manifest.steps) - 1,
    }


def _variant_label(cfg: dict) -> str:
    p = cfg["pgkd"]
    if not p["use_validation_report"] and not p["use_hard_negatives"]:
        return "Student + PGKD (w/o Validation, w/o Hard Negatives)"
    if not p["use_validation_report"]:
        return "Student + PGKD (w/o Validation)"
    if not p["use_hard_negatives"]:
        return "Student + PGKD (w/o Hard Negatives)"
    return "Student + PGKD"


def cmd_pgkd(spec: RunSpec, ablations: bool = False) -> str:
    size = spec.config["seed_size"]
    results = _map(spec, _pgkd_job, [(spec, s, "PGKD", size, ".") for s in spec.seeds])
    table = metrics_table(
        spec,
        [("Student (base)", [r["base"] for r in results]),
         (_variant_label(spec.config), [r["pgkd"] for r in results])],
    )  # fmt: skip
    if ablations:
        acc = {"PGKD": [r["pgkd"]["accuracy"] for r in results]}
        for variant in ("w/o Validation", "w/o Hard Negatives"):
            sub = "ablation_" + variant.replace("/", "").replace(" ", "_").lower()
            res = _map(spec, _pgkd_job, [(spec, s, variant, size, sub) for s in spec.seeds])
            acc[variant] = [r["pgkd"]["accuracy"] for r in res]
        table += "\n| Method | Accuracy |\n|---|---|\n"
        table += "".join(f"| {k} | {statistics.fmean(v):.3f} |\n" for k, v in acc.items())
    _write(spec.out / "summary_pgkd.md", table)
    return table


# -- scaling-sweep ---------------------------------------------------------


def cmd_scaling_sweep(spec: RunSpec, sizes: list[int]) -> str:
    if not sizes:
        raise SystemExit("error: --sizes needs at least one value")
    jobs = [(spec, s, "PGKD", n, f"size_{n}") for n in sizes for s in spec.seeds]
    results = _map(spec, _pgkd_job, jobs)
    keys = ("accuracy", "macro_f1", "weighted_f1")
    lines = [
        spec.header(),
        "",
        "| Samples | Base Acc. | Base Macro F1 | Base Weighted F1 "
        "| PGKD Acc. | PGKD Macro F1 | PGKD Weighted F1 |",
        "|---|---|---|---|---|---|---|",
    ]
    csv_lines = ["samples,method,accuracy,macro_f1,weighted_f1"]
    k = len(spec.seeds)
    for i, n in enumerate(sizes):
        chunk = results[i * k : (i + 1) * k]
        cells = []
        for arm in ("base", "pgkd"):
            means = [statistics.fmean(r[arm][m] for r in chunk) for m in keys]
            cells += [f"{v:.3f}" for v in means]
            csv_lines.append(f"{n},{arm}," + ",".join(repr(v) for v in means))
        lines.append(f"| {n} | " + " | ".join(cells) + " |")
    table = "\n".join(lines) + "\n"
    _write(spec.out / "summary_scaling.md", table)
    _write(spec.out / "summary_scaling.csv", "\n".join(csv_lines) + "\n")
    return table


# -- zero-shot -------------------------------------------------------------


def cmd_zero_shot(spec: RunSpec) -> str:
    cfg = spec.config
    taxonomy, _, test = prepare_data(spec)
    if cfg["teacher"]["kind"] == "mock":
        backend = OracleClassifierBackend(
            taxonomy, {s.text: s.label for s in test}, cfg["teacher"]["quality"], spec.seeds[0]
        )
    else:
        backend = _make_teacher(cfg, taxonomy, [], spec.seeds[0])
    preds, failures = zero_shot_classify(
        backend, taxonomy, [s.text for s in test], workers=int(cfg["workers"])
    )
    kept = [(s.label, p) for s, p in zip(test, preds) if p is not None]
    lines = [spec.header(), ""]
    if kept:
        report = classification_report([t for t, _ in kept], [p for _, p in kept], len(taxonomy))
        lines.append(render_report(report, taxonomy))
    else:
        lines.append("no parsable predictions")
    lines += ["", f"failures: {failures} of {len(test)}"]
    text = "\n".join(lines) + "\n"
    _write(spec.out / "report_zero_shot.txt", text)
    return text


# -- report ----------------------------------------------------------------


def render_manifest(manifest: RunManifest, pricing: Pricing | None = None) -> str:
    taxonomy = Taxonomy(tuple(manifest.taxonomy))
    lines = [
        "| Step | Val loss | Accuracy | Macro F1 | Accepted | Rejected | History | Patience |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for s in manifest.steps:
        mark = " *" if s.step == manifest.best_step else ""
        lines.append(
            f"| {s.step}{mark} | {s.val_loss:.4f} | {s.report.accuracy:.3f} | "
            f"{s.report.macro_f1:.3f} | {s.accepted} | {s.rejected} | {s.history_size} | "
            f"{s.patience_counter} |"
        )
    lines += [
        "",
        f"best step: {manifest.best_step}  best validation loss: {manifest.best_val_loss:.6f}"
        + ("  (stopped early)" if manifest.stopped_early else ""),
        "",
        "Validation report of the best model:",
        render_report(manifest.final_report, taxonomy),
    ]
    if manifest.test_report is not None:
        lines += ["", "Test report of the best model:", render_report(manifest.test_report, taxonomy)]
    if pricing is not None:
        lines += ["", render_cost_table(estimate_cost_latency(manifest, pricing)).rstrip()]
    return "\n".join(lines) + "\n"


def cmd_report(path: Path, pricing: Pricing | None) -> str:
    return render_manifest(RunManifest.from_json(Path(path).read_text()), pricing)


def cmd_measure_latency(model_path: Path, dataset: Path, taxonomy_path: Path, repeats: int) -> str:
    from .student import StudentModel

    model = StudentModel.load(model_path)
    texts = [s.text for s in load_dataset(dataset, Taxonomy.load(taxonomy_path))]
    timings = measure_latency(model, texts, repeats=repeats)
    prompts = [build_zero_shot_prompt(model.taxonomy, t) for t in texts[:64]]
    mean_in = statistics.fmean(count_tokens(p) for p in prompts)
    return json.dumps({"student_latency_s": timings, "zero_shot_input_tokens": mean_in}, indent=2)


# -- argument parsing ------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="JSONL dataset with text/label fields")
    p.add_argument("--taxonomy", required=True, help="one class name per line")
    p.add_argument("--test", help="optional JSONL test set; default holds out test_fraction")
    p.add_argument("--seeds", type=int, nargs="+", help="sampling seeds (default 0..4)")
    p.add_argument("--seed-size", type=int, help="seed set size (default 1000)")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="parallel seeds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgkd", description="Distil a teacher LLM into a small text classifier, guided by validation performance."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-base", help="train and evaluate the base student per seed")
    _common(p)

    for name, help_ in (
        ("pgkd", "run the distillation loop per seed"),
        ("scaling-sweep", "base vs PGKD across seed-set sizes"),
        ("zero-shot", "teacher zero-shot classification of the test set"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--teacher", choices=["http", "mock"], help="teacher backend")
        if name != "zero-shot":
            p.add_argument("--no-validation", action="store_true", help="drop the report block")
            p.add_argument("--no-hard-negatives", action="store_true", help="drop hard negatives")
        if name == "pgkd":
            p.add_argument("--ablations", action="store_true", help="also run both ablations")
        if name == "scaling-sweep":
            p.add_argument("--sizes", type=int, nargs="+", required=True)

    p = sub.add_parser("report", help="re-render a run manifest")
    p.add_argument("manifest")
    p.add_argument("--price-in", type=float, help="$ per 1k input tokens")
    p.add_argument("--price-out", type=float, help="$ per 1k output tokens")

    p = sub.add_parser("measure-latency", help="time student inference on one 64-sample batch")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--repeats", type=int, default=5)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "report":
            pricing = None
            if args.price_in is not None or args.price_out is not None:
                pricing = Pricing(args.price_in or 0.0, args.price_out or 0.0)
            print(cmd_report(args.manifest, pricing), end="")
        elif args.command == "measure-latency":
            print(cmd_measure_latency(args.model, args.dataset, args.taxonomy, args.repeats))
        else:
            spec = build_spec(args)
            if args.command == "train-base":
                print(cmd_train_base(spec), end="")
            elif args.command == "pgkd":
                print(cmd_pgkd(spec, ablations=args.ablations), end="")
            elif args.command == "scaling-sweep":
                print(cmd_scaling_sweep(spec, args.sizes), end="")
            elif args.command == "zero-shot":
                print(cmd_zero_shot(spec), end="")
    except PGKDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
