"""Performance-guided knowledge distillation for text classifiers.

A small student classifier is trained, evaluated, and improved round by round
with data generated by an LLM teacher that sees the student's validation
report, its correct and misclassified training samples, and its hard
negatives.
"""

from .corpus import DatasetSplit, LabeledSample, Taxonomy, load_dataset, sample_seed_set, split
from .evaluation import ClassificationReport, evaluate, mine_hard_negatives, partition, render_report
from .loop import PGKDConfig, RunManifest, run_pgkd
from .student import FeaturizerConfig, StudentConfig, StudentModel, train

__version__ = "0.1.0"

__all__ = [
    "ClassificationReport",
    "DatasetSplit",
    "FeaturizerConfig",
    "LabeledSample",
    "PGKDConfig",
    "RunManifest",
    "StudentConfig",
    "StudentModel",
    "Taxonomy",
    "evaluate",
    "load_dataset",
    "mine_hard_negatives",
    "partition",
    "render_report",
    "run_pgkd",
    "sample_seed_set",
    "split",
    "train",
]
