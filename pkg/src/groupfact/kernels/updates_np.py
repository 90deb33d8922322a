"""Vectorized numpy versions of the per-cell inference kernels.

Shapes: frames are flattened over subjects to ``T`` columns. Common factor
moments are (M, K), individual bases (L, M, J), activations (J, T). Auxiliary
fields are (M, T) except ``psi`` which is (J, M, T). ``cls`` is 0-based.
"""

import numpy as np


def _safe_mul(coef, val):
    # 0 * inf -> 0: a vanishing weight removes the term from the bound
    with np.errstate(invalid="ignore"):
        return np.where(coef == 0.0, 0.0, coef * val)


def _per_cell_individual(ai, si, subj):
    """(J, M, T) array of ai[subj[t], m, j] * si[j, t]."""
    # products of huge E[1/x] may overflow to inf, which aux() handles
    with np.errstate(over="ignore"):
        return ai[subj].transpose(2, 1, 0) * si[:, None, :]


def aux(einv_ac, einv_ai, einv_si, cls, subj):
    """Closed-form Jensen weights (pi1, pi2, psi) for fixed moments.

    ``pi2`` is formed as ``c / (c + d)`` rather than ``1 - pi1``, which would
    cancel when one part dominates.
    """
    J = einv_si.shape[0]
    c = einv_ac[:, cls]
    with np.errstate(divide="ignore"):
        inv = 1.0 / _per_cell_individual(einv_ai, einv_si, subj)
    tot = inv.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        psi = np.where(tot > 0, inv / tot, 1.0 / J)
        d = np.where(tot > 0, 1.0 / tot, np.inf)
        pi1 = d / (c + d)
        pi2 = c / (c + d)
    ci, di = np.isinf(c), np.isinf(d)
    pi1 = np.where(ci & di, 0.5, np.where(di, 1.0, np.where(ci, 0.0, pi1)))
    pi2 = np.where(ci & di, 0.5, np.where(di, 0.0, np.where(ci, 1.0, pi2)))
    return pi1, pi2, psi


def taylor_point(ex_ac, ex_ai, ex_si, cls, subj):
    return ex_ac[:, cls] + _per_cell_individual(ex_ai, ex_si, subj).sum(axis=0)


def common_stats(X, pi1, w, cls, K):
    """Sums of 1/w and pi1^2 X over the frames of each class: (M, K) each."""
    M = X.shape[0]
    inv_w = 1.0 / w
    wx = pi1 * pi1 * X
    rho = np.zeros((M, K))
    tau = np.zeros((M, K))
    for k in range(K):
        sel = cls == k
        rho[:, k] = inv_w[:, sel].sum(axis=1)
        tau[:, k] = wx[:, sel].sum(axis=1)
    return rho, tau


def individual_basis_stats(X, pi2, psi, w, ex_si, einv_si, offsets):
    """(L, M, J) sums over each subject's frames."""
    L = offsets.shape[0] - 1
    J, M = psi.shape[0], X.shape[0]
    coef = (pi2 * pi2 * X)[None] * psi * psi
    inv_w = 1.0 / w
    rho = np.zeros((L, M, J))
    tau = np.zeros((L, M, J))
    for l in range(L):
        s = slice(offsets[l], offsets[l + 1])
        rho[l] = inv_w[:, s] @ ex_si[:, s].T
        tau[l] = _safe_mul(coef[:, :, s], einv_si[:, None, s]).sum(axis=2).T
    return rho, tau


def activation_stats(X, pi2, psi, w, ex_ai, einv_ai, subj):
    """(J, T) sums over features."""
    coef = (pi2 * pi2 * X)[None] * psi * psi
    rho = (ex_ai[subj].transpose(2, 1, 0) / w[None]).sum(axis=1)
    tau = _safe_mul(coef, einv_ai[subj].transpose(2, 1, 0)).sum(axis=1)
    return rho, tau


def bound_cells(X, pi1, pi2, psi, w, ex_ac, einv_ac, ex_ai, einv_ai, ex_si, einv_si, cls, subj):
    """Per-cell (M, T) value of the Jensen + Taylor bound on log p(X | latents)."""
    jensen = _safe_mul(pi1 * pi1 * X, einv_ac[:, cls])
    coef = (pi2 * pi2 * X)[None] * psi * psi
    jensen = jensen + _safe_mul(coef, _per_cell_individual(einv_ai, einv_si, subj)).sum(axis=0)
    recon = taylor_point(ex_ac, ex_ai, ex_si, cls, subj)
    return -jensen - np.log(w) + 1.0 - recon / w
