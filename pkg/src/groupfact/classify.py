"""Label prediction from learned common bases, accuracy metrics, learning curves.

A test frame is compared with the posterior-mean common basis of every class
and assigned to the nearest one in squared Euclidean distance. Train/test
splits are contiguous in time (prefix for training, fixed suffix for testing)
because neighbouring EEG frames are strongly correlated.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError
from .inference import FitOptions, Posterior, fit
from .model import GroupedDataset, Hyperparams

RULES = ("argmin", "argmax", "scaled")
_RULE_ALIASES = {"nearest-basis": "argmin", "scaled-nearest-basis": "scaled"}


@dataclass
class Prediction:
    """Predicted 1-based labels and the (N_l, K) distance scores per subject."""

    labels: list
    scores: list
    rule: str = "argmin"

    @property
    def n_frames(self) -> list[int]:
        return [y.size for y in self.labels]


@dataclass
class EvalReport:
    """Accuracy summary.

    Attributes
    ----------
    per_subject : list of float
        Fraction of correctly labeled frames for each subject (nan when a
        subject has no test frames).
    pooled : float
        Correct frames over all frames, i.e. subjects weighted by frame count.
    confusion : ndarray, shape (K, K)
        ``confusion[i, j]`` counts frames of true class ``i+1`` predicted as
        ``j+1``.
    """

    per_subject: list
    pooled: float
    confusion: np.ndarray
    names: list | None = None

    def to_dict(self) -> dict:
        names = self.names or [f"subject{l + 1}" for l in range(len(self.per_subject))]
        return {
            "per_subject": {n: _json_float(a) for n, a in zip(names, self.per_subject)},
            "pooled": _json_float(self.pooled),
            "confusion": self.confusion.tolist(),
            "n_frames": int(self.confusion.sum()),
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _json_float(v):
    return None if v is None or math.isnan(v) else float(v)


def _templates(post_or_bases) -> np.ndarray:
    if isinstance(post_or_bases, Posterior):
        return post_or_bases.common_mean()
    return np.asarray(post_or_bases, dtype=float)


def class_scores(x: np.ndarray, bases: np.ndarray, rule: str = "argmin") -> np.ndarray:
    """Squared distances (N, K) between frames ``x`` (M, N) and basis columns (M, K).

    For ``scaled`` each column is first multiplied by the nonnegative
    least-squares factor ``max(0, <x, a_k> / <a_k, a_k>)``.
    """
    x = np.asarray(x, dtype=float)
    if rule == "scaled":
        norms = np.einsum("mk,mk->k", bases, bases)
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = np.where(norms > 0, (x.T @ bases) / norms, 0.0)
        alpha = np.maximum(alpha, 0.0)
        diff = x.T[:, None, :] - alpha[:, :, None] * bases.T[None, :, :]
        return np.einsum("nkm,nkm->nk", diff, diff)
    diff = x.T[:, None, :] - bases.T[None, :, :]
    return np.einsum("nkm,nkm->nk", diff, diff)


def predict(X_test, post, rule: str = "argmin") -> Prediction:
    """Assign each test frame to a class.

    Parameters
    ----------
    X_test : GroupedDataset or sequence of (M, N_l) arrays
        Labels, if present, are ignored.
    post : Posterior or (M, K) array
        Class templates are the columns of the posterior mean of ``A_C``.
    rule : {"argmin", "argmax", "scaled"}
        ``argmin`` picks the nearest template, ``argmax`` the farthest (kept
        for comparison experiments), ``scaled`` the nearest after optimally
        rescaling each template. Ties go to the smallest class id.
    """
    rule = _RULE_ALIASES.get(rule, rule)
    if rule not in RULES:
        raise DomainError(f"unknown rule {rule!r}; expected one of {RULES}")
    bases = _templates(post)
    xs = X_test.X if isinstance(X_test, GroupedDataset) else [np.asarray(x, dtype=float) for x in X_test]
    if not xs or sum(x.shape[1] for x in xs) == 0:
        raise DataError("empty test set")
    labels, scores = [], []
    for l, x in enumerate(xs):
        if x.shape[0] != bases.shape[0]:
            raise DataError(f"subject {l + 1}: test data has {x.shape[0]} features, posterior has {bases.shape[0]}")
        d = class_scores(x, bases, rule)
        pick = np.argmax(d, axis=1) if rule == "argmax" else np.argmin(d, axis=1)
        labels.append(pick.astype(np.int64) + 1)
        scores.append(d)
    return Prediction(labels, scores, rule)


def evaluate(pred: Prediction | Sequence, truth: Sequence, K: int | None = None, names=None) -> EvalReport:
    """Per-subject and pooled accuracy plus the confusion matrix."""
    pl = pred.labels if isinstance(pred, Prediction) else list(pred)
    truth = list(truth.Y) if isinstance(truth, GroupedDataset) else list(truth)
    if len(pl) != len(truth):
        raise DataError(f"{len(pl)} predicted subjects but {len(truth)} truth vectors")
    pl = [np.asarray(p, dtype=np.int64) for p in pl]
    truth = [np.asarray(t, dtype=np.int64) for t in truth]
    for l, (p, t) in enumerate(zip(pl, truth)):
        if p.shape != t.shape:
            raise DataError(f"subject {l + 1}: {p.size} predictions but {t.size} truth labels")
    allp = np.concatenate(pl) if pl else np.zeros(0, np.int64)
    allt = np.concatenate(truth) if truth else np.zeros(0, np.int64)
    if allt.size and (allt.min() < 1 or allp.min() < 1):
        raise DataError("labels must be >= 1")
    K = K or int(max(allp.max(initial=0), allt.max(initial=0)))
    if allt.size and (allt.max() > K or allp.max() > K):
        raise DataError(f"labels exceed K={K}")
    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (allt - 1, allp - 1), 1)
    per = [float(np.mean(p == t)) if t.size else math.nan for p, t in zip(pl, truth)]
    pooled = float(np.trace(conf) / conf.sum()) if conf.sum() else math.nan
    return EvalReport(per, pooled, conf, list(names) if names is not None else None)


def chance_baseline(truth: Sequence, K: int, seed: int = 0) -> EvalReport:
    """Score uniformly random labels against ``truth``; expected accuracy is 1/K."""
    rng = np.random.default_rng(seed)
    truth = [np.asarray(t, dtype=np.int64) for t in truth]
    guess = [rng.integers(1, K + 1, size=t.size) for t in truth]
    return evaluate(guess, truth, K)


# -- splitting and learning curves --------------------------------------------

def split_suffix(data: GroupedDataset, test_fraction: float):
    """Contiguous split: the last ``ceil(test_fraction * N_l)`` frames of each subject are the test set."""
    if not 0 < test_fraction < 1:
        raise DomainError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = [math.ceil(test_fraction * n) for n in data.n_frames]
    for l, (n, nt) in enumerate(zip(data.n_frames, n_test)):
        if nt >= n:
            raise DataError(f"{data.subject_name(l)}: {n} frames leave no training frames")
    pool = data.frames([slice(0, n - nt) for n, nt in zip(data.n_frames, n_test)])
    test = data.frames([slice(n - nt, n) for n, nt in zip(data.n_frames, n_test)])
    return pool, test


def training_prefix(pool: GroupedDataset, fraction: float, K: int) -> GroupedDataset:
    """First ``ceil(fraction * N_l)`` frames per subject; every class must appear in each."""
    if not 0 < fraction <= 1:
        raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
    sub = pool.frames([slice(0, math.ceil(fraction * n)) for n in pool.n_frames])
    for l, y in enumerate(sub.Y):
        missing = sorted(set(range(1, K + 1)) - set(np.unique(y).tolist()))
        if missing:
            raise DataError(f"training fraction {fraction}: {sub.subject_name(l)} has no frames of class "
                            f"{missing[0]} in its first {y.size} frames")
    return sub


@dataclass
class CurveRow:
    fraction: float
    subject: str
    accuracy: float
    n_train: int
    n_test: int
    pooled: bool = False


def learning_curve(data: GroupedDataset, h: Hyperparams, opts: FitOptions | None = None,
                   fractions: Sequence[float] = (0.25, 0.5, 1.0), test_fraction: float = 0.3,
                   rule: str = "argmin") -> list[CurveRow]:
    """Accuracy on a fixed held-out suffix as the training prefix grows.

    The last ``ceil(test_fraction * N_l)`` frames of every subject form the
    test set for all fractions; training uses the first
    ``ceil(fraction * N_pool)`` of the remaining frames. Returns one row per
    subject plus one pooled row for each fraction.
    """
    fractions = [float(f) for f in fractions]
    if not fractions:
        raise DomainError("need at least one fraction")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise DomainError(f"fractions must be strictly ascending, got {fractions}")
    if not data.labeled:
        raise DataError("learning curve needs labeled data")
    data.check_labels(h.K)
    pool, test = split_suffix(data, test_fraction)
    # validate every split before any fitting
    trains = [training_prefix(pool, f, h.K) for f in fractions]
    rows = []
    for f, train in zip(fractions, trains):
        post, _ = fit(train, h, opts)
        rep = evaluate(predict(test, post, rule), test.Y, h.K)
        for l in range(data.L):
            rows.append(CurveRow(f, data.subject_name(l), rep.per_subject[l],
                                 train.n_frames[l], test.n_frames[l]))
        rows.append(CurveRow(f, "pooled", rep.pooled, sum(train.n_frames), sum(test.n_frames), True))
    return rows


CURVE_HEADER = ["fraction", "subject", "pooled", "accuracy", "n_train", "n_test"]


def write_learning_curve(rows: Sequence[CurveRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CURVE_HEADER)
        for r in rows:
            out.writerow([repr(r.fraction), r.subject, int(r.pooled), repr(float(r.accuracy)), r.n_train, r.n_test])


def read_learning_curve(path) -> list[CurveRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [CurveRow(float(r["fraction"]), r["subject"], float(r["accuracy"]), int(r["n_train"]),
                         int(r["n_test"]), r["pooled"] == "1") for r in csv.DictReader(fh)]


PREDICTION_PREFIX = ["subject", "frame", "label"]


def write_predictions(pred: Prediction, path, names=None) -> None:
    """CSV with 1-based frame index, label and one distance column per class."""
    K = pred.scores[0].shape[1] if pred.scores else 0
    names = names or [f"subject{l + 1}" for l in range(len(pred.labels))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(PREDICTION_PREFIX + [f"d{k + 1}" for k in range(K)])
        for name, y, d in zip(names, pred.labels, pred.scores):
            for n in range(y.size):
                out.writerow([name, n + 1, int(y[n])] + [repr(float(v)) for v in d[n]])


def read_predictions(path) -> tuple[Prediction, list[str]]:
    """Inverse of :func:`write_predictions`; subjects keep their file order."""
    names, labels, scores = [], {}, {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != PREDICTION_PREFIX:
            raise DataError(f"{path}: expected header starting with {PREDICTION_PREFIX}")
        for lineno, row in enumerate(reader, start=2):
            try:
                name, frame, lab = row[0], int(row[1]), int(row[2])
                d = [float(v) for v in row[3:]]
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: malformed prediction row") from exc
            if name not in labels:
                names.append(name)
                labels[name], scores[name] = [], []
            if frame != len(labels[name]) + 1:
                raise DataError(f"{path}:{lineno}: frames of {name} out of order")
            labels[name].append(lab)
            scores[name].append(d)
    K = len(header) - 3
    pred = Prediction([np.asarray(labels[n], dtype=np.int64) for n in names],
                      [np.asarray(scores[n], dtype=float).reshape(-1, K) for n in names])
    return pred, names
