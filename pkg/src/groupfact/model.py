"""Containers for the group NMF generative model and its exact sampler.

Observations are per-subject matrices ``X_l`` (features x frames). Each frame
``n`` of subject ``l`` is exponential with mean

    Lambda[l][m, n] = A_C[m, Y_l[n]] + sum_j A_I[l, m, j] * S_I[l][j, n]

where ``A_C`` holds one common basis column per class, ``A_I`` holds per-subject
individual bases and ``S_I`` their activations. Labels are 1-based class ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Hyperparams:
    """Prior settings. ``c`` holds one Gamma shape=rate value per class.

    Defaults are a = b = c_k = 0.1 with K = 3 classes and J = 1 individual
    basis; ``c`` left as None expands to ``(0.1,) * K``.
    """

    a: float = 0.1
    b: float = 0.1
    c: tuple[float, ...] | None = None
    K: int = 3
    J: int = 1

    def __post_init__(self):
        if self.c is None:
            object.__setattr__(self, "c", (0.1,) * int(self.K))
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K}")
        if int(self.J) != self.J or self.J < 1:
            raise DomainError(f"J must be a positive integer, got {self.J}")
        if len(self.c) != self.K:
            raise DomainError(f"c needs one value per class (K={self.K}), got {len(self.c)}")
        for name, v in (("a", self.a), ("b", self.b)) + tuple((f"c_{k + 1}", v) for k, v in enumerate(self.c)):
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"hyperparameter {name} must be finite and > 0, got {v}")

    @property
    def c_array(self) -> np.ndarray:
        return np.asarray(self.c, dtype=float)


@dataclass(frozen=True)
class GroupedDataset:
    """Per-subject nonnegative feature matrices with optional labels.

    ``X[l]`` is ``M x N_l``; ``Y[l]`` (if given) has ``N_l`` class ids in
    ``1..K``. Arrays are copied and made read-only on construction.
    """

    X: tuple
    Y: tuple | None = None
    names: tuple | None = None
    frame_ms: float | None = None

    def __post_init__(self):
        xs = tuple(_frozen(x) for x in self.X)
        if not xs:
            raise DataError("dataset needs at least one subject")
        M = None
        for l, x in enumerate(xs):
            if x.ndim != 2:
                raise DataError(f"subject {l + 1}: X must be 2-D (features x frames), got shape {x.shape}")
            if M is None:
                M = x.shape[0]
            elif x.shape[0] != M:
                raise DataError(f"subject {l + 1} has {x.shape[0]} features, subject 1 has {M}")
            if not np.all(np.isfinite(x)):
                raise DataError(f"subject {l + 1}: non-finite feature values")
            if np.any(x < 0):
                m, n = np.argwhere(x < 0)[0]
                raise DataError(f"subject {l + 1}: negative feature at (feature {m + 1}, frame {n + 1})")
        object.__setattr__(self, "X", xs)
        if self.Y is not None:
            ys = tuple(_frozen(y, dtype=np.int64) for y in self.Y)
            if len(ys) != len(xs):
                raise DataError(f"{len(ys)} label vectors for {len(xs)} subjects")
            for l, (x, y) in enumerate(zip(xs, ys)):
                if y.shape != (x.shape[1],):
                    raise DataError(f"subject {l + 1}: {y.shape[0] if y.ndim == 1 else y.shape} labels "
                                    f"for {x.shape[1]} frames")
                if y.size and y.min() < 1:
                    raise DataError(f"subject {l + 1}: labels must be >= 1")
            object.__setattr__(self, "Y", ys)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(str(s) for s in self.names))
            if len(self.names) != len(xs):
                raise DataError("one name per subject required")

    @property
    def L(self) -> int:
        return len(self.X)

    @property
    def M(self) -> int:
        return self.X[0].shape[0]

    @property
    def n_frames(self) -> list[int]:
        return [x.shape[1] for x in self.X]

    @property
    def labeled(self) -> bool:
        return self.Y is not None

    def subject_name(self, l: int) -> str:
        return self.names[l] if self.names is not None else f"subject{l + 1}"

    def check_labels(self, K: int) -> None:
        if self.Y is None:
            raise DataError("labels required")
        for l, y in enumerate(self.Y):
            if y.size and y.max() > K:
                raise DataError(f"subject {l + 1}: label {int(y.max())} outside 1..{K}")

    def class_histogram(self, K: int | None = None) -> np.ndarray:
        if self.Y is None:
            raise DataError("dataset is unlabeled")
        K = K or int(max((y.max() for y in self.Y if y.size), default=0))
        return np.bincount(np.concatenate(self.Y) - 1, minlength=K).astype(np.int64)

    def summary(self, K: int | None = None) -> dict:
        out = {"L": self.L, "M": self.M, "N": self.n_frames}
        if self.Y is not None:
            out["class_histogram"] = self.class_histogram(K).tolist()
        return out

    def frames(self, slices: Sequence[slice]) -> "GroupedDataset":
        """Per-subject frame selection, e.g. a temporal prefix or suffix."""
        if len(slices) != self.L:
            raise DataError("one slice per subject required")
        X = [x[:, s] for x, s in zip(self.X, slices)]
        Y = None if self.Y is None else [y[s] for y, s in zip(self.Y, slices)]
        return GroupedDataset(X, Y, self.names, self.frame_ms)

    def unlabeled(self) -> "GroupedDataset":
        return GroupedDataset(self.X, None, self.names, self.frame_ms)

    def with_labels(self, Y) -> "GroupedDataset":
        return GroupedDataset(self.X, Y, self.names, self.frame_ms)


@dataclass(frozen=True)
class Frames:
    """All subjects' frames concatenated along the time axis.

    This is the layout the kernels work on: ``X`` is ``M x T`` with
    ``T = sum(N_l)``, ``subj[t]`` and 0-based ``cls[t]`` per column, and
    subject ``l`` owning columns ``offsets[l]:offsets[l + 1]``.
    """

    X: np.ndarray
    subj: np.ndarray
    cls: np.ndarray | None
    offsets: np.ndarray

    @classmethod
    def from_dataset(cls, data: GroupedDataset) -> "Frames":
        X = np.ascontiguousarray(np.concatenate(data.X, axis=1), dtype=float)
        n = data.n_frames
        subj = np.repeat(np.arange(data.L, dtype=np.int64), n)
        labels = None if data.Y is None else np.concatenate(data.Y).astype(np.int64) - 1
        offsets = np.concatenate([[0], np.cumsum(n)]).astype(np.int64)
        return cls(X, subj, labels, offsets)

    @property
    def T(self) -> int:
        return self.X.shape[1]

    def locate(self, t: int) -> tuple[int, int]:
        """(subject, frame) for flat column ``t``, both 0-based."""
        l = int(self.subj[t])
        return l, int(t - self.offsets[l])


@dataclass(frozen=True)
class LatentState:
    """Ground-truth latent values: ``A_C`` (M, K), ``A_I`` (L, M, J), ``S_I[l]`` (J, N_l)."""

    A_C: np.ndarray
    A_I: np.ndarray
    S_I: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "A_C", _frozen(self.A_C))
        object.__setattr__(self, "A_I", _frozen(self.A_I))
        object.__setattr__(self, "S_I", tuple(_frozen(s) for s in self.S_I))
        if self.A_C.ndim != 2 or self.A_I.ndim != 3:
            raise DataError("A_C must be (M, K) and A_I must be (L, M, J)")
        L, M, J = self.A_I.shape
        if self.A_C.shape[0] != M:
            raise DataError(f"A_C has {self.A_C.shape[0]} rows, A_I has {M}")
        if len(self.S_I) != L:
            raise DataError(f"{len(self.S_I)} activation matrices for {L} subjects")
        for l, s in enumerate(self.S_I):
            if s.ndim != 2 or s.shape[0] != J:
                raise DataError(f"S_I[{l}] must have {J} rows, got shape {s.shape}")
        if any(np.any(v < 0) for v in (self.A_C, self.A_I, *self.S_I)):
            raise DataError("latent values must be nonnegative")


def reconstruct(latent: LatentState, labels) -> list[np.ndarray]:
    """Exponential means ``Lambda[l]`` (M x N_l) for every subject."""
    if len(labels) != len(latent.S_I):
        raise DataError(f"{len(labels)} label vectors for {len(latent.S_I)} subjects")
    K = latent.A_C.shape[1]
    out = []
    for l, (y, s) in enumerate(zip(labels, latent.S_I)):
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (s.shape[1],):
            raise DataError(f"subject {l + 1}: {y.size} labels for {s.shape[1]} frames")
        if y.size and (y.min() < 1 or y.max() > K):
            raise DataError(f"subject {l + 1}: labels must lie in 1..{K}")
        out.append(latent.A_C[:, y - 1] + latent.A_I[l] @ s)
    return out


def make_labels(n_frames: Sequence[int], K: int, pattern: str = "random", seed=None) -> list[np.ndarray]:
    """Synthetic label vectors.

    ``random`` draws iid uniform classes, ``cyclic`` repeats 1..K, ``blocks``
    splits each subject into K contiguous runs.
    """
    rng = np.random.default_rng(seed)
    out = []
    for n in n_frames:
        if pattern == "random":
            y = rng.integers(1, K + 1, size=n)
        elif pattern == "cyclic":
            y = np.arange(n) % K + 1
        elif pattern == "blocks":
            y = np.minimum(np.arange(n) * K // max(n, 1), K - 1) + 1
        else:
            raise DomainError(f"unknown label pattern {pattern!r}")
        out.append(y.astype(np.int64))
    return out


def _gamma_positive(rng, shape_rate, size) -> np.ndarray:
    """Gamma(k, rate=k) draws, redrawing exact zeros (support is x > 0)."""
    k = np.broadcast_to(np.asarray(shape_rate, dtype=float), size)
    x = rng.gamma(k, 1.0 / k)
    bad = ~(x > 0)
    while bad.any():
        x[bad] = rng.gamma(k[bad], 1.0 / k[bad])
        bad = ~(x > 0)
    return x


def sample_latent(h: Hyperparams, L: int, M: int, labels, rng) -> LatentState:
    A_C = _gamma_positive(rng, h.a, (M, h.K))
    A_I = _gamma_positive(rng, h.b, (L, M, h.J))
    c = h.c_array
    S_I = [_gamma_positive(rng, c[y - 1], (h.J, y.size)) for y in labels]
    return LatentState(A_C, A_I, S_I)


def sample_observations(latent: LatentState, labels, rng) -> list[np.ndarray]:
    lam = reconstruct(latent, labels)
    out = []
    for mean in lam:
        x = rng.exponential(mean)
        zero = ~(x > 0)
        while zero.any():
            x[zero] = rng.exponential(mean[zero])
            zero = ~(x > 0)
        out.append(x)
    return out


def sample_dataset(h: Hyperparams, L: int, M: int, N, labels=None, seed: int = 0,
                   label_pattern: str = "random") -> tuple[GroupedDataset, LatentState]:
    """Draw a labeled dataset and its latent state from the generative model.

    Parameters
    ----------
    h : Hyperparams
    L, M : int
        Number of subjects and features.
    N : int or sequence of int
        Frames per subject (ragged lengths allowed).
    labels : sequence of arrays, optional
        1-based class ids per subject. Generated with ``label_pattern`` when
        omitted.
    seed : int
        Seeds one ``numpy.random.Generator``; output is a deterministic
        function of the arguments.
    """
    if L < 1 or M < 1:
        raise DomainError(f"L and M must be >= 1, got L={L}, M={M}")
    n = [int(N)] * L if np.isscalar(N) else [int(v) for v in N]
    if len(n) != L or min(n) < 0:
        raise DomainError(f"need {L} nonnegative frame counts, got {n}")
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = make_labels(n, h.K, label_pattern, rng)
    labels = [np.asarray(y, dtype=np.int64) for y in labels]
    if [y.size for y in labels] != n:
        raise DomainError("label vector lengths must match N")
    for l, y in enumerate(labels):
        if y.size and (y.min() < 1 or y.max() > h.K):
            raise DomainError(f"subject {l + 1}: labels must lie in 1..{h.K}")
    latent = sample_latent(h, L, M, labels, rng)
    X = sample_observations(latent, labels, rng)
    return GroupedDataset(X, labels), latent


def separated_common_bases(M: int, K: int, rng, boost: float = 5.0, base_shape: float = 2.0) -> np.ndarray:
    """Common bases with a distinct feature block per class.

    Entries start as Gamma(base_shape, rate=base_shape) draws; features
    ``m`` with ``m * K // M == k`` are multiplied by ``boost`` in column ``k``.
    """
    A_C = _gamma_positive(rng, base_shape, (M, K))
    block = np.arange(M) * K // M
    for k in range(K):
        A_C[block == k, k] *= boost
    return A_C


def sample_separated(L: int, M: int, N, K: int = 3, J: int = 1, seed: int = 0, boost: float = 5.0,
                     base_shape: float = 2.0, individual_shape: float = 0.1,
                     individual_scale: float = 0.02, label_pattern: str = "random"):
    """Synthetic group data with well-separated shared class patterns.

    Common bases come from :func:`separated_common_bases` and are shared by
    all subjects. Individual bases are Gamma(individual_shape, individual_shape);
    activations are the same draws scaled by ``individual_scale`` so that the
    class pattern dominates each frame.
    """
    n = [int(N)] * L if np.isscalar(N) else [int(v) for v in N]
    rng = np.random.default_rng(seed)
    A_C = separated_common_bases(M, K, rng, boost, base_shape)
    A_I = _gamma_positive(rng, individual_shape, (L, M, J))
    labels = make_labels(n, K, label_pattern, rng)
    S_I = [individual_scale * _gamma_positive(rng, individual_shape, (J, v)) for v in n]
    latent = LatentState(A_C, A_I, S_I)
    X = sample_observations(latent, labels, rng)
    return GroupedDataset(X, labels), latent


def write_latent(latent: LatentState, path) -> None:
    """Ground-truth latents as CSV ``factor,i1,i2,i3,value`` with 1-based indices.

    ``A_C`` rows carry (m, k); ``A_I`` rows (l, m, j); ``S_I`` rows (l, j, n).
    """
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["factor", "i1", "i2", "i3", "value"])
        for (m, k), v in np.ndenumerate(latent.A_C):
            out.writerow(["A_C", m + 1, k + 1, "", repr(float(v))])
        for (l, m, j), v in np.ndenumerate(latent.A_I):
            out.writerow(["A_I", l + 1, m + 1, j + 1, repr(float(v))])
        for l, s in enumerate(latent.S_I):
            for (j, n), v in np.ndenumerate(s):
                out.writerow(["S_I", l + 1, j + 1, n + 1, repr(float(v))])
