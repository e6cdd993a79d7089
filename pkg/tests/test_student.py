import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from pgkd.corpus import LabeledSample, Taxonomy
from pgkd.errors import EmptyDataset
from pgkd.student import (
    FeaturizerConfig,
    StudentConfig,
    StudentModel,
    _sgd_step,
    cross_entropy,
    cross_entropy_grad,
    featurize,
    hash_ngram,
    loss,
    predict_proba,
    train,
)

UNIGRAM = FeaturizerConfig(ngram_orders=(1,), dimension=1024)
TWO = Taxonomy(("neg", "pos"))


def toy_separable(n=20, seed=0):
    """Two classes with disjoint vocabularies."""
    rng = np.random.default_rng(seed)
    vocab = [["apple", "pear", "plum", "fig", "kiwi"], ["rock", "sand", "clay", "stone", "gravel"]]
    out = []
    for i in range(n):
        label = i % 2
        words = rng.choice(vocab[label], size=4)
        out.append(LabeledSample(i, " ".join(words) + f" w{i}", label))
    return out


def random_model(n_classes, dim, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    tax = Taxonomy(tuple(f"c{i}" for i in range(n_classes)))
    feat = FeaturizerConfig(ngram_orders=(1, 2), dimension=dim)
    return StudentModel(
        rng.normal(0, scale, (n_classes, dim)), rng.normal(0, scale, n_classes), feat, tax
    )


def test_featurize_empty_is_zero():
    assert featurize("", UNIGRAM).nnz == 0
    assert featurize("   ", UNIGRAM).nnz == 0


def test_featurize_counts_accumulate():
    vec = featurize("a b a", UNIGRAM)
    assert vec[0, hash_ngram("a", UNIGRAM)] == 2
    assert vec[0, hash_ngram("b", UNIGRAM)] == 1
    assert vec.sum() == 3


def test_featurize_lowercases_and_is_deterministic():
    a = featurize("Hello World hello", FeaturizerConfig())
    b = featurize("hello world HELLO", FeaturizerConfig())
    assert (a != b).nnz == 0


def test_featurize_truncates_to_512_tokens():
    words = [f"t{i}" for i in range(600)]
    long = featurize(" ".join(words), UNIGRAM)
    cut = featurize(" ".join(words[:512]), UNIGRAM)
    assert (long != cut).nnz == 0


def test_hash_seed_changes_indices():
    other = FeaturizerConfig(ngram_orders=(1,), dimension=1024, hash_seed=1)
    words = [f"w{i}" for i in range(50)]
    assert [hash_ngram(w, UNIGRAM) for w in words] != [hash_ngram(w, other) for w in words]


@pytest.mark.parametrize("dim", [0, 1, 3, 1000])
def test_featurizer_dimension_must_be_power_of_two(dim):
    with pytest.raises(ValueError):
        FeaturizerConfig(dimension=dim)


def test_zero_model_is_uniform():
    model = StudentModel.zeros(Taxonomy(("a", "b", "c", "d")), UNIGRAM)
    assert np.allclose(predict_proba(model, "any text at all"), 0.25, atol=0, rtol=0)


def test_hand_softmax_two_classes():
    model = StudentModel.zeros(TWO, UNIGRAM)
    model.bias[:] = [math.log(3), 0.0]
    p = model.predict_proba("whatever")
    assert p == pytest.approx([0.75, 0.25], abs=1e-12)


def test_probabilities_normalised_on_random_inputs():
    model = random_model(5, 256, seed=1, scale=3.0)
    rng = np.random.default_rng(2)
    texts = [" ".join(f"w{k}" for k in rng.integers(0, 300, rng.integers(0, 30))) for _ in range(1000)]
    p = model.predict_proba_many(texts)
    assert p.shape == (1000, 5)
    assert np.all(p >= 0)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-9


def test_loss_zero_when_true_class_certain():
    model = StudentModel.zeros(TWO, UNIGRAM)
    model.weights[0, hash_ngram("apple", UNIGRAM)] = 2000.0
    model.weights[1, hash_ngram("rock", UNIGRAM)] = 2000.0
    samples = [LabeledSample(0, "apple", 0), LabeledSample(1, "rock", 1)]
    assert loss(model, samples) == 0.0


def test_uniform_loss_is_log_classes():
    model = StudentModel.zeros(Taxonomy(("a", "b", "c", "d")), UNIGRAM)
    samples = [LabeledSample(i, f"text {i}", i % 4) for i in range(10)]
    assert loss(model, samples) == pytest.approx(math.log(4), abs=1e-12)
    assert round(loss(model, samples), 4) == 1.3863


def _brute_force_loss(model, samples):
    total = 0.0
    for s in samples:
        x = featurize(s.text, model.featurizer).toarray()[0]
        logits = [float(model.weights[c] @ x + model.bias[c]) for c in range(len(model.taxonomy))]
        m = max(logits)
        log_z = m + math.log(sum(math.exp(v - m) for v in logits))
        total += log_z - logits[s.label]
    return total / len(samples)


@pytest.mark.parametrize("seed", range(5))
def test_loss_matches_brute_force(seed):
    model = random_model(4, 128, seed, scale=0.5)
    rng = np.random.default_rng(seed + 100)
    samples = [
        LabeledSample(i, " ".join(f"w{k}" for k in rng.integers(0, 60, 8)), int(rng.integers(4)))
        for i in range(25)
    ]
    assert loss(model, samples) == pytest.approx(_brute_force_loss(model, samples), abs=1e-9)


def test_loss_empty():
    with pytest.raises(EmptyDataset):
        loss(StudentModel.zeros(TWO, UNIGRAM), [])


def finite_difference_gradient(W, b, X, y, eps=1e-6):
    gW = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += eps
        Wm[idx] -= eps
        gW[idx] = (cross_entropy(Wp, b, X, y) - cross_entropy(Wm, b, X, y)) / (2 * eps)
    gb = np.zeros_like(b)
    for i in range(len(b)):
        bp, bm = b.copy(), b.copy()
        bp[i] += eps
        bm[i] -= eps
        gb[i] = (cross_entropy(W, bp, X, y) - cross_entropy(W, bm, X, y)) / (2 * eps)
    return gW, gb


def random_instance(seed):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 6))
    d = int(rng.choice([8, 16, 32, 64]))
    n = int(rng.integers(3, 12))
    X = sparse.random(n, d, density=0.3, random_state=seed, format="csr") * 3
    y = rng.integers(0, c, n)
    return rng.normal(0, 1, (c, d)), rng.normal(0, 1, c), X, y


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    W, b, X, y = random_instance(seed)
    _, gW, gb = cross_entropy_grad(W, b, X, y)
    fW, fb = finite_difference_gradient(W, b, X, y)
    assert relative_error(np.concatenate([gW.ravel(), gb]), np.concatenate([fW.ravel(), fb])) < 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_sparse_sgd_step_equals_dense_update(seed):
    W, b, X, y = random_instance(seed)
    _, gW, gb = cross_entropy_grad(W, b, X, y)
    d = X.shape[1]
    tax = Taxonomy(tuple(f"c{i}" for i in range(len(b))))
    model = StudentModel(W.copy(), b.copy(), FeaturizerConfig(dimension=d), tax)
    _sgd_step(model, X, y, lr=0.5)
    assert np.allclose(model.weights, W - 0.5 * gW, atol=1e-12)
    assert np.allclose(model.bias, b - 0.5 * gb, atol=1e-12)


def test_train_separable_reaches_full_accuracy():
    data = toy_separable()
    model, log = train(data, data[:6], StudentConfig(epochs=30, batch_size=4), TWO, UNIGRAM)
    pred = model.predict_proba_many([s.text for s in data]).argmax(axis=1)
    assert (pred == [s.label for s in data]).all()
    assert log.stopped_epoch <= 30
    assert log.best_val_loss <= log.val_losses[0]


def test_train_patience_zero_stops_after_first_regression():
    data = toy_separable()
    # Validation texts use the train vocabularies with swapped labels, so
    # every epoch of fitting makes the validation loss worse.
    flipped = [LabeledSample(100 + s.id, s.text + " v", 1 - s.label) for s in data[:6]]
    model, log = train(data, flipped, StudentConfig(epochs=30, batch_size=4, patience=0), TWO, UNIGRAM)
    assert log.val_losses[1] > log.val_losses[0]
    assert (log.stopped_epoch, log.best_epoch) == (2, 1)
    assert loss(model, flipped) == log.val_losses[0]


def test_train_patience_counts_consecutive_epochs():
    data = toy_separable()
    flipped = [LabeledSample(100 + s.id, s.text + " v", 1 - s.label) for s in data[:6]]
    _, log = train(data, flipped, StudentConfig(epochs=30, batch_size=4, patience=3), TWO, UNIGRAM)
    assert (log.stopped_epoch, log.best_epoch) == (5, 1)


def test_train_is_bitwise_deterministic():
    data = toy_separable(40, seed=3)
    cfg = StudentConfig(epochs=5, batch_size=8, seed=11)
    a, _ = train(data[:30], data[30:], cfg, TWO, UNIGRAM)
    b, _ = train(data[:30], data[30:], cfg, TWO, UNIGRAM)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.bias.tobytes() == b.bias.tobytes()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), patience=st.integers(0, 3))
def test_returned_model_has_minimum_validation_loss(seed, patience):
    rng = np.random.default_rng(seed)
    data = toy_separable(30, seed)
    noisy = [LabeledSample(200 + i, s.text + " n", int(rng.integers(2))) for i, s in enumerate(data[:8])]
    cfg = StudentConfig(epochs=12, batch_size=4, patience=patience, seed=seed, learning_rate=2.0)
    model, log = train(data, noisy, cfg, TWO, UNIGRAM)
    assert log.best_epoch == int(np.argmin(log.val_losses)) + 1
    assert loss(model, noisy) == min(log.val_losses)


def test_train_requires_data():
    with pytest.raises(EmptyDataset):
        train([], toy_separable()[:2], StudentConfig(), TWO, UNIGRAM)
    with pytest.raises(EmptyDataset):
        train(toy_separable(), [], StudentConfig(), TWO, UNIGRAM)


def test_warm_start_continues_from_init():
    data = toy_separable()
    cfg = StudentConfig(epochs=2, batch_size=4)
    first, _ = train(data, data[:4], cfg, TWO, UNIGRAM)
    second, log = train(data, data[:4], cfg, TWO, init=first)
    assert second.featurizer == UNIGRAM
    assert log.val_losses[0] <= loss(first, data[:4])


def test_checkpoint_round_trip(tmp_path):
    model = random_model(3, 256, seed=4)
    model.save(tmp_path / "m.npz")
    loaded = StudentModel.load(tmp_path / "m.npz")
    texts = ["some text here", "w1 w2 w3", ""]
    assert loaded.taxonomy == model.taxonomy and loaded.featurizer == model.featurizer
    assert loaded.predict_proba_many(texts).tobytes() == model.predict_proba_many(texts).tobytes()
