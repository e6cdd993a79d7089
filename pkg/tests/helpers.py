"""Small builders shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from pgkd.corpus import split
from pgkd.student import FeaturizerConfig, StudentConfig
from pgkd.synthetic import SyntheticCorpus, SyntheticSpec

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"
AG_NEWS = ("World", "Sports", "Business", "Sci/Tech")

FAST_FEATURIZER = FeaturizerConfig(dimension=2**12)
FAST_STUDENT = StudentConfig(epochs=8, learning_rate=1.0, patience=2)


def synthetic_setup(
    n_classes: int = 4,
    seed_size: int = 120,
    seed: int = 0,
    reserve: int = 2000,
    test: int = 0,
    spec: SyntheticSpec | None = None,
):
    """Taxonomy, split seed set, teacher reserve and test set from one generator."""
    gen = SyntheticCorpus(spec or SyntheticSpec(n_classes=n_classes), seed=seed)
    data = split(gen.sample(seed_size), 0.8, seed)
    held_out = gen.sample(reserve)
    test_set = gen.sample(test) if test else []
    return gen.taxonomy, data, held_out, test_set
