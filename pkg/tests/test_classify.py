import numpy as np
import pytest

from groupfact.classify import (chance_baseline, class_scores, evaluate, learning_curve, predict,
                                read_learning_curve, read_predictions, split_suffix, training_prefix,
                                write_learning_curve, write_predictions)
from groupfact.errors import DataError, DomainError
from groupfact.inference import FitOptions, fit
from groupfact.model import GroupedDataset, Hyperparams, sample_separated


@pytest.fixture
def bases():
    return np.array([[5.0, 1.0, 0.2], [1.0, 4.0, 0.3], [0.5, 0.5, 6.0], [1.0, 1.0, 1.0]])


def test_exact_column_gives_zero_distance(bases):
    pred = predict([bases[:, [1]]], bases)
    assert pred.labels[0][0] == 2
    assert pred.scores[0][0, 1] == 0.0


def test_tie_goes_to_smallest_class():
    bases = np.array([[1.0, 0.0], [0.0, 1.0]])
    pred = predict([np.array([[0.5], [0.5]])], bases)
    assert pred.scores[0][0, 0] == pred.scores[0][0, 1]
    assert pred.labels[0][0] == 1
    assert predict([np.array([[0.5], [0.5]])], bases, "argmax").labels[0][0] == 1


def test_scores_match_brute_force(bases, rng):
    x = rng.gamma(1.0, size=(4, 30))
    for rule in ("argmin", "scaled"):
        d = class_scores(x, bases, rule)
        for n in range(30):
            for k in range(3):
                a = bases[:, k]
                if rule == "scaled":
                    alpha = max(0.0, float(x[:, n] @ a) / float(a @ a))
                    a = alpha * a
                assert d[n, k] == pytest.approx(float(np.sum((x[:, n] - a) ** 2)), rel=1e-12)


def test_scaled_rule_ignores_frame_scale(bases):
    x = 7.5 * bases[:, [2]]
    assert predict([x], bases, "scaled").labels[0][0] == 3


def test_rule_aliases_and_validation(bases):
    x = [bases[:, [0]]]
    assert predict(x, bases, "nearest-basis").rule == "argmin"
    assert predict(x, bases, "scaled-nearest-basis").rule == "scaled"
    with pytest.raises(DomainError):
        predict(x, bases, "vote")


def test_predict_errors(bases):
    with pytest.raises(DataError, match="features"):
        predict([np.ones((3, 2))], bases)
    with pytest.raises(DataError, match="empty"):
        predict([np.ones((4, 0))], bases)


def test_column_permutation_permutes_labels(bases, rng):
    x = rng.gamma(2.0, size=(4, 50))
    sigma = np.array([2, 0, 1])
    a = predict([x], bases).labels[0]
    b = predict([x], bases[:, sigma]).labels[0]
    # column sigma[i] of the old bases is column i of the new one
    inv = np.argsort(sigma)
    assert np.array_equal(inv[a - 1] + 1, b)


def test_argmax_flips_two_class_decisions(rng):
    bases = rng.gamma(2.0, size=(5, 2))
    x = rng.gamma(2.0, size=(5, 200))
    a = predict([x], bases, "argmin")
    b = predict([x], bases, "argmax")
    ties = a.scores[0][:, 0] == a.scores[0][:, 1]
    assert not ties.any()
    assert np.all(a.labels[0] != b.labels[0])


def test_evaluate_perfect_and_shifted():
    y = [np.array([1, 2, 3, 1, 2, 3]), np.array([3, 2, 1])]
    rep = evaluate(y, y, 3)
    assert rep.per_subject == [1.0, 1.0] and rep.pooled == 1.0
    assert np.array_equal(rep.confusion, np.diag([3, 3, 3]))
    shifted = [v % 3 + 1 for v in y]
    rep = evaluate(shifted, y, 3)
    assert rep.pooled == 0.0 and np.trace(rep.confusion) == 0
    assert np.array_equal(rep.confusion.sum(axis=1), [3, 3, 3])


def test_pooled_weights_subjects_by_frames():
    truth = [np.ones(9, int), np.ones(1, int)]
    pred = [np.ones(9, int), np.full(1, 2)]
    rep = evaluate(pred, truth, 2)
    assert rep.per_subject == [1.0, 0.0]
    assert rep.pooled == pytest.approx(0.9)
    assert rep.confusion.sum() == 10


def test_evaluate_length_mismatch():
    with pytest.raises(DataError):
        evaluate([np.ones(3, int)], [np.ones(4, int)])
    with pytest.raises(DataError):
        evaluate([np.ones(3, int)], [np.ones(3, int), np.ones(3, int)])


def test_chance_baseline():
    truth = [np.tile([1, 2, 3], 3334)[:10_000]]
    rep = chance_baseline(truth, 3, seed=0)
    assert abs(rep.pooled - 1 / 3) <= 0.02


def test_report_json(tmp_path):
    rep = evaluate([np.array([1, 2])], [np.array([1, 1])], 2, names=["s1"])
    rep.write_json(tmp_path / "r.json")
    import json

    d = json.loads((tmp_path / "r.json").read_text())
    assert d == {"per_subject": {"s1": 0.5}, "pooled": 0.5, "confusion": [[1, 1], [0, 0]], "n_frames": 2}


def test_predictions_roundtrip(tmp_path, bases, rng):
    pred = predict([rng.gamma(1, size=(4, 5)), rng.gamma(1, size=(4, 3))], bases)
    write_predictions(pred, tmp_path / "p.csv", ["a", "b"])
    back, names = read_predictions(tmp_path / "p.csv")
    assert names == ["a", "b"]
    for u, v in zip(pred.labels, back.labels):
        assert np.array_equal(u, v)
    for u, v in zip(pred.scores, back.scores):
        assert np.array_equal(u, v)


# -- splits and learning curves ----------------------------------------------------

def _labeled(n=(20, 16)):
    rng = np.random.default_rng(0)
    X = [rng.gamma(1, size=(4, k)) for k in n]
    Y = [np.arange(k) % 3 + 1 for k in n]
    return GroupedDataset(X, Y, ["s1", "s2"])


def test_suffix_split_is_contiguous():
    d = _labeled()
    pool, test = split_suffix(d, 0.25)
    assert pool.n_frames == [15, 12] and test.n_frames == [5, 4]
    assert np.array_equal(test.X[0], d.X[0][:, 15:])
    assert np.array_equal(pool.Y[1], d.Y[1][:12])


def test_training_prefix_and_missing_class():
    d = _labeled()
    pool, _ = split_suffix(d, 0.25)
    assert training_prefix(pool, 0.5, 3).n_frames == [8, 6]
    with pytest.raises(DataError, match="s1 has no frames of class 3"):
        training_prefix(pool, 0.1, 3)


def test_learning_curve_validation():
    d = _labeled()
    h = Hyperparams()
    with pytest.raises(DomainError):
        learning_curve(d, h, fractions=[0.5, 0.25])
    with pytest.raises(DomainError):
        learning_curve(d, h, fractions=[0.0, 1.0])
    with pytest.raises(DataError, match="class"):
        learning_curve(d, h, FitOptions(max_iters=2), fractions=[0.05, 1.0])


def test_learning_curve_full_fraction_equals_plain_run(tmp_path):
    data, _ = sample_separated(3, 24, 40, seed=2)
    h = Hyperparams()
    opts = FitOptions(max_iters=30)
    rows = learning_curve(data, h, opts, [0.5, 1.0], test_fraction=0.25)
    assert len(rows) == 2 * (3 + 1)
    pool, test = split_suffix(data, 0.25)
    post, _ = fit(pool, h, opts)
    rep = evaluate(predict(test, post), test.Y, 3)
    full = [r for r in rows if r.fraction == 1.0]
    assert [r.accuracy for r in full[:3]] == rep.per_subject
    assert full[3].pooled and full[3].accuracy == rep.pooled
    # the held-out suffix is the same for every fraction
    assert {r.n_test for r in rows if not r.pooled} == {10}
    write_learning_curve(rows, tmp_path / "lc.csv")
    assert read_learning_curve(tmp_path / "lc.csv") == rows


def test_learning_curve_deterministic():
    data, _ = sample_separated(2, 12, 30, seed=4)
    kw = dict(opts=FitOptions(max_iters=10, seed=3), fractions=[0.5, 1.0])
    assert learning_curve(data, Hyperparams(), **kw) == learning_curve(data, Hyperparams(), **kw)
