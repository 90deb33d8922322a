"""Mean-field variational inference for the group NMF model.

Every latent entry gets a GIG factor ``q(x) ~ x**(gamma-1) exp(-rho x - tau/x)``.
The log-likelihood ``-X/Lambda - log Lambda`` is bounded from below in two
steps: the reciprocal of the sum inside ``Lambda`` is split with weights
``pi1``/``pi2`` (common vs individual part) and ``psi`` (over individual
bases), and ``-log Lambda`` is linearized around a per-cell point ``w``. With
those auxiliary quantities held fixed each factor update is closed form, and
each auxiliary update is too, so alternating them is coordinate ascent on a
single bound.
"""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DataError, DomainError, EmptyClassWarning, NumericalError
from .model import Frames, GroupedDataset, Hyperparams
from .special import GigMoments, GigParams, gamma_cross_entropy_array, gig_entropy_array

log = logging.getLogger(__name__)


@dataclass
class GigBlock:
    """Parameters and cached moments for an array of independent GIG factors."""

    gamma: np.ndarray
    rho: np.ndarray
    tau: np.ndarray
    e_x: np.ndarray = field(repr=False)
    e_inv: np.ndarray = field(repr=False)
    e_log: np.ndarray = field(repr=False)
    log_z: np.ndarray = field(repr=False)

    @classmethod
    def from_params(cls, gamma, rho, tau) -> "GigBlock":
        gamma, rho, tau = (np.array(v, dtype=float) for v in np.broadcast_arrays(gamma, rho, tau))
        e_x, e_inv, e_log, log_z = kernels.gig_moments(gamma, rho, tau)
        return cls(gamma, rho, tau, e_x, e_inv, e_log, log_z)

    @property
    def shape(self) -> tuple:
        return self.gamma.shape

    def params(self, idx) -> GigParams:
        return GigParams(float(self.gamma[idx]), float(self.rho[idx]), float(self.tau[idx]))

    def moments(self, idx) -> GigMoments:
        return GigMoments(float(self.e_x[idx]), float(self.e_inv[idx]), float(self.e_log[idx]))

    def entropy(self) -> np.ndarray:
        return gig_entropy_array(self.gamma, self.rho, self.tau, self.e_x, self.e_inv, self.e_log, self.log_z)

    def copy(self) -> "GigBlock":
        return GigBlock(*(np.array(getattr(self, f)) for f in
                          ("gamma", "rho", "tau", "e_x", "e_inv", "e_log", "log_z")))

    def _check(self, name):
        bad = ~(np.isfinite(self.e_x) & np.isfinite(self.e_log) & ~np.isnan(self.e_inv))
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise NumericalError(f"q_{name}{idx}: invalid moments for {self.params(idx)}")


@dataclass
class Posterior:
    """Variational factors: ``ac`` (M, K), ``ai`` (L, M, J), ``si`` (J, T).

    ``si`` columns are frames of all subjects back to back; subject ``l`` owns
    ``offsets[l]:offsets[l + 1]``.
    """

    ac: GigBlock
    ai: GigBlock
    si: GigBlock
    offsets: np.ndarray

    @property
    def M(self) -> int:
        return self.ac.shape[0]

    @property
    def K(self) -> int:
        return self.ac.shape[1]

    @property
    def L(self) -> int:
        return self.ai.shape[0]

    @property
    def J(self) -> int:
        return self.ai.shape[2]

    def common_mean(self) -> np.ndarray:
        return self.ac.e_x.copy()

    def individual_mean(self) -> np.ndarray:
        return self.ai.e_x.copy()

    def activation_mean(self, l: int) -> np.ndarray:
        return self.si.e_x[:, self.offsets[l]:self.offsets[l + 1]].copy()

    def copy(self) -> "Posterior":
        return Posterior(self.ac.copy(), self.ai.copy(), self.si.copy(), self.offsets.copy())


@dataclass
class AuxState:
    """Bound-tightening quantities on the (M, T) cell grid.

    ``pi1`` weights the common part and ``pi2 = 1 - pi1`` the individual
    part (kept separately for accuracy; derived from ``pi1`` when omitted and
    refreshed by :meth:`set_pi1`), ``psi`` (J, M, T)
    splits the individual part over bases, ``w`` is the linearization point.
    The common-part split ``phi`` is one-hot at the frame's label and is only
    materialized on request.
    """

    pi1: np.ndarray
    psi: np.ndarray
    w: np.ndarray
    cls: np.ndarray
    K: int
    pi2: np.ndarray | None = None

    def __post_init__(self):
        if self.pi2 is None:
            self.pi2 = 1.0 - self.pi1

    def set_pi1(self, idx, value) -> None:
        self.pi1[idx] = value
        self.pi2[idx] = 1.0 - self.pi1[idx]

    @property
    def phi(self) -> np.ndarray:
        M, T = self.pi1.shape
        out = np.zeros((self.K, M, T))
        out[self.cls, :, np.arange(T)] = 1.0
        return out

    def copy(self) -> "AuxState":
        return AuxState(self.pi1.copy(), self.psi.copy(), self.w.copy(), self.cls, self.K, self.pi2.copy())


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 500
    rel_tol: float = 1e-6
    min_iters: int | None = None
    seed: int = 0
    track_elbo_every: int = 1
    init_jitter: float = 0.1
    init_scale: float = 1e4

    def __post_init__(self):
        if self.min_iters is None:
            object.__setattr__(self, "min_iters", min(10, self.max_iters))
        if not (1 <= self.min_iters <= self.max_iters):
            raise DomainError(f"need max_iters >= min_iters >= 1, got {self.max_iters}, {self.min_iters}")
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.track_elbo_every < 1:
            raise DomainError("track_elbo_every must be >= 1")
        if not (0 <= self.init_jitter < 1 and self.init_scale > 0):
            raise DomainError("init_jitter must lie in [0, 1) and init_scale be > 0")


class TracePoint(NamedTuple):
    iter: int
    elbo: float
    wall_ms: float


def _as_frames(data) -> Frames:
    return data if isinstance(data, Frames) else Frames.from_dataset(data)


def _labeled_frames(data, K: int) -> Frames:
    fr = _as_frames(data)
    if fr.cls is None:
        raise DataError("inference needs labeled data")
    if fr.cls.size and (fr.cls.min() < 0 or fr.cls.max() >= K):
        raise DataError(f"labels must lie in 1..{K}")
    return fr


def init_posterior(h: Hyperparams, data, seed: int = 0, jitter: float = 0.1,
                   scale: float = 1e4) -> Posterior:
    """Starting factors: ``gamma`` = prior shape, ``rho = scale * u``, ``tau = scale``.

    ``u`` is iid uniform on ``[1 - jitter, 1 + jitter]``. With a large
    ``scale`` each factor is sharply peaked near ``1/sqrt(u)``, i.e. near the
    prior mean of one, while keeping ``E[1/x]`` finite, which a Gamma with
    shape below one does not have.
    """
    fr = _labeled_frames(data, h.K)
    L, M, T = fr.offsets.shape[0] - 1, fr.X.shape[0], fr.T
    rng = np.random.default_rng(seed)

    def block(shape, size):
        u = rng.uniform(1.0 - jitter, 1.0 + jitter, size=size) if jitter > 0 else np.ones(size)
        return GigBlock.from_params(np.broadcast_to(shape, size), scale * u, np.full(size, scale))

    ac = block(h.a, (M, h.K))
    ai = block(h.b, (L, M, h.J))
    si = block(h.c_array[fr.cls][None, :], (h.J, T))
    return Posterior(ac, ai, si, fr.offsets.copy())


def update_w(post: Posterior, data) -> np.ndarray:
    """Linearization point: the mean of the exponential rate under q."""
    fr = _labeled_frames(data, post.K)
    return kernels.taylor_point(post.ac.e_x, post.ai.e_x, post.si.e_x, fr.cls, fr.subj)


def update_aux(post: Posterior, data, w: np.ndarray | None = None) -> AuxState:
    """Optimal ``pi1`` and ``psi`` for the current moments.

    ``psi_j`` is proportional to ``1 / (E[1/A_I] E[1/S_I])`` and
    ``pi1 = d / (c + d)`` with ``c = E[1/A_C]`` at the frame's class and
    ``d = sum_j psi_j**2 E[1/A_I] E[1/S_I]``. ``w`` is recomputed unless given.
    """
    fr = _labeled_frames(data, post.K)
    for name, blk in (("A_C", post.ac), ("A_I", post.ai), ("S_I", post.si)):
        if np.isnan(blk.e_inv).any():
            blk._check(name)
    pi1, pi2, psi = kernels.aux(post.ac.e_inv, post.ai.e_inv, post.si.e_inv, fr.cls, fr.subj)
    if w is None:
        w = update_w(post, fr)
    return AuxState(pi1, psi, w, fr.cls, post.K, pi2)


def refresh_aux(post: Posterior, data) -> AuxState:
    fr = _as_frames(data)
    return update_aux(post, fr, update_w(post, fr))


def update_q_AC(aux: AuxState, data, h: Hyperparams) -> GigBlock:
    """Common-basis factors: ``gamma = a``, ``rho = a + sum 1/w``, ``tau = sum pi1^2 X``.

    Sums run over the frames labeled with the basis' class. A class with no
    frames keeps the prior and triggers :class:`EmptyClassWarning`.
    """
    fr = _labeled_frames(data, h.K)
    rho, tau = kernels.common_stats(fr.X, aux.pi1, aux.w, fr.cls, h.K)
    counts = np.bincount(fr.cls, minlength=h.K)
    for k in np.flatnonzero(counts == 0):
        warnings.warn(f"class {k + 1} has no frames; its common basis stays at the prior",
                      EmptyClassWarning, stacklevel=2)
    blk = GigBlock.from_params(h.a, h.a + rho, tau)
    blk._check("A_C")
    return blk


def update_q_AI(post: Posterior, aux: AuxState, data, h: Hyperparams) -> GigBlock:
    """Individual-basis factors, summing over each subject's own frames."""
    fr = _labeled_frames(data, h.K)
    rho, tau = kernels.individual_basis_stats(fr.X, aux.pi2, aux.psi, aux.w, post.si.e_x, post.si.e_inv,
                                              fr.offsets)
    blk = GigBlock.from_params(h.b, h.b + rho, tau)
    blk._check("A_I")
    return blk


def update_q_SI(post: Posterior, aux: AuxState, data, h: Hyperparams) -> GigBlock:
    """Activation factors with the class-dependent prior ``c[y]``, summing over features."""
    fr = _labeled_frames(data, h.K)
    rho, tau = kernels.activation_stats(fr.X, aux.pi2, aux.psi, aux.w, post.ai.e_x, post.ai.e_inv, fr.subj)
    c = h.c_array[fr.cls][None, :]
    blk = GigBlock.from_params(c, c + rho, tau)
    blk._check("S_I")
    return blk


def elbo(post: Posterior, aux: AuxState, data, h: Hyperparams, terms: bool = False):
    """Evidence lower bound for the given factors and auxiliary quantities.

    With ``terms=True`` returns a dict with the likelihood bound, the prior
    cross-entropy terms and the entropies separately (plus ``"total"``).
    """
    fr = _labeled_frames(data, h.K)
    cells = kernels.bound_cells(fr.X, aux.pi1, aux.pi2, aux.psi, aux.w, post.ac.e_x, post.ac.e_inv, post.ai.e_x,
                                post.ai.e_inv, post.si.e_x, post.si.e_inv, fr.cls, fr.subj)
    if not np.all(np.isfinite(cells)):
        m, t = (int(i) for i in np.argwhere(~np.isfinite(cells))[0])
        l, n = fr.locate(t)
        raise NumericalError(f"non-finite bound at subject {l + 1}, feature {m + 1}, frame {n + 1}")
    c = h.c_array[fr.cls][None, :]
    parts = {
        "likelihood": float(cells.sum()),
        "prior_A_C": float(gamma_cross_entropy_array(h.a, h.a, post.ac.e_x, post.ac.e_log).sum()),
        "prior_A_I": float(gamma_cross_entropy_array(h.b, h.b, post.ai.e_x, post.ai.e_log).sum()),
        "prior_S_I": float(gamma_cross_entropy_array(c, c, post.si.e_x, post.si.e_log).sum()),
        "entropy_A_C": float(post.ac.entropy().sum()),
        "entropy_A_I": float(post.ai.entropy().sum()),
        "entropy_S_I": float(post.si.entropy().sum()),
    }
    for name, v in parts.items():
        if not math.isfinite(v):
            raise NumericalError(f"non-finite ELBO term {name}")
    total = math.fsum(parts.values())
    if terms:
        return dict(parts, total=total)
    return total


def sweep(post: Posterior, data, h: Hyperparams) -> Posterior:
    """One coordinate-ascent pass: refresh aux before each factor update."""
    fr = _as_frames(data)
    post = replace(post)
    post.ac = update_q_AC(refresh_aux(post, fr), fr, h)
    post.ai = update_q_AI(post, refresh_aux(post, fr), fr, h)
    post.si = update_q_SI(post, refresh_aux(post, fr), fr, h)
    return post


def fit(data: GroupedDataset, h: Hyperparams, opts: FitOptions | None = None):
    """Run coordinate ascent until the relative ELBO change drops below ``rel_tol``.

    Returns
    -------
    posterior : Posterior
    trace : list of TracePoint
        ``(iter, elbo, wall_ms)`` starting with the initialization at iter 0.
        The ELBO is evaluated with freshly optimized auxiliary quantities.
    """
    opts = opts or FitOptions()
    fr = _labeled_frames(data, h.K)
    if isinstance(data, GroupedDataset):
        data.check_labels(h.K)
    t0 = time.perf_counter()
    post = init_posterior(h, fr, opts.seed, opts.init_jitter, opts.init_scale)
    prev = elbo(post, refresh_aux(post, fr), fr, h)
    trace = [TracePoint(0, prev, (time.perf_counter() - t0) * 1e3)]
    for it in range(1, opts.max_iters + 1):
        post = sweep(post, fr, h)
        if it % opts.track_elbo_every and it != opts.max_iters:
            continue
        cur = elbo(post, refresh_aux(post, fr), fr, h)
        trace.append(TracePoint(it, cur, (time.perf_counter() - t0) * 1e3))
        change = abs(cur - prev) / max(abs(prev), np.finfo(float).tiny)
        log.debug("iter %d elbo %.10g rel change %.3g", it, cur, change)
        if cur < prev - 1e-8 * abs(prev):
            log.warning("ELBO decreased at iter %d: %.12g -> %.12g", it, prev, cur)
        prev = cur
        if it >= opts.min_iters and change < opts.rel_tol:
            log.info("converged after %d sweeps (elbo %.10g)", it, cur)
            break
    return post, trace


# -- serialization -----------------------------------------------------------

POSTERIOR_HEADER = ["factor", "i1", "i2", "i3", "gamma", "rho", "tau"]


def write_posterior(post: Posterior, path) -> None:
    """Flat CSV, one row per factor entry, 1-based indices.

    ``A_C`` rows carry (m, k); ``A_I`` rows (l, m, j); ``S_I`` rows (l, j, n).
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(POSTERIOR_HEADER)
        for (m, k) in np.ndindex(*post.ac.shape):
            out.writerow(["A_C", m + 1, k + 1, ""] + _gig_row(post.ac, (m, k)))
        for (l, m, j) in np.ndindex(*post.ai.shape):
            out.writerow(["A_I", l + 1, m + 1, j + 1] + _gig_row(post.ai, (l, m, j)))
        for l in range(post.L):
            for j in range(post.J):
                for t in range(post.offsets[l], post.offsets[l + 1]):
                    out.writerow(["S_I", l + 1, j + 1, t - post.offsets[l] + 1] + _gig_row(post.si, (j, t)))


def _gig_row(blk, idx):
    return [repr(float(blk.gamma[idx])), repr(float(blk.rho[idx])), repr(float(blk.tau[idx]))]


def read_posterior(path) -> Posterior:
    rows = {"A_C": [], "A_I": [], "S_I": []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != POSTERIOR_HEADER:
            raise DataError(f"{path}: expected header {POSTERIOR_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            try:
                name = row[0]
                idx = tuple(int(v) - 1 for v in row[1:4] if v != "")
                vals = tuple(float(v) for v in row[4:7])
                rows[name].append((idx, vals))
            except (KeyError, ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: malformed posterior row {row}") from exc
    if not rows["A_C"]:
        raise DataError(f"{path}: no A_C rows")

    def fill(entries, shape):
        arr = np.full((3,) + shape, np.nan)
        for idx, vals in entries:
            arr[(slice(None),) + idx] = vals
        if np.isnan(arr).any():
            raise DataError(f"{path}: incomplete factor table")
        return GigBlock.from_params(*arr)

    M = 1 + max(i[0] for i, _ in rows["A_C"])
    K = 1 + max(i[1] for i, _ in rows["A_C"])
    ac = fill(rows["A_C"], (M, K))
    if rows["A_I"]:
        L = 1 + max(i[0] for i, _ in rows["A_I"])
        J = 1 + max(i[2] for i, _ in rows["A_I"])
        ai = fill(rows["A_I"], (L, M, J))
    else:
        L, J = 0, 0
        ai = GigBlock.from_params(np.ones((0, M, 0)), np.ones((0, M, 0)), np.ones((0, M, 0)))
    n = [0] * L
    for (l, _, t), _ in rows["S_I"]:
        n[l] = max(n[l], t + 1)
    offsets = np.concatenate([[0], np.cumsum(n)]).astype(np.int64)
    si_entries = [((j, offsets[l] + t), vals) for (l, j, t), vals in rows["S_I"]]
    si = fill(si_entries, (J, int(offsets[-1])))
    return Posterior(ac, ai, si, offsets)


def write_trace(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["iter", "elbo", "wall_ms"])
        for p in trace:
            out.writerow([p.iter, repr(float(p.elbo)), f"{p.wall_ms:.3f}"])


def read_trace(path) -> list[TracePoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [TracePoint(int(r["iter"]), float(r["elbo"]), float(r["wall_ms"])) for r in reader]
