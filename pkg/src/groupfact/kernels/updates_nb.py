"""Loop kernels for the inference updates, compiled with numba.

Every output element is produced by one serial loop in a fixed order, so the
parallel versions give bitwise-identical results for any thread count.
"""

import math

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _safe_mul(coef, val):
    return 0.0 if coef == 0.0 else coef * val


@njit(parallel=True, cache=True)
def aux(einv_ac, einv_ai, einv_si, cls, subj):
    J = einv_si.shape[0]
    M = einv_ac.shape[0]
    T = cls.shape[0]
    pi1 = np.empty((M, T))
    pi2 = np.empty((M, T))
    psi = np.empty((J, M, T))
    for t in prange(T):
        l = subj[t]
        k = cls[t]
        for m in range(M):
            tot = 0.0
            for j in range(J):
                inv = 1.0 / (einv_ai[l, m, j] * einv_si[j, t])
                psi[j, m, t] = inv
                tot += inv
            if tot > 0.0:
                for j in range(J):
                    psi[j, m, t] /= tot
                d = 1.0 / tot
            else:
                for j in range(J):
                    psi[j, m, t] = 1.0 / J
                d = math.inf
            c = einv_ac[m, k]
            if math.isinf(c) and math.isinf(d):
                pi1[m, t] = 0.5
                pi2[m, t] = 0.5
            elif math.isinf(d):
                pi1[m, t] = 1.0
                pi2[m, t] = 0.0
            elif math.isinf(c):
                pi1[m, t] = 0.0
                pi2[m, t] = 1.0
            else:
                # both weights directly: 1 - pi1 cancels when one part dominates
                pi1[m, t] = d / (c + d)
                pi2[m, t] = c / (c + d)
    return pi1, pi2, psi


@njit(parallel=True, cache=True)
def taylor_point(ex_ac, ex_ai, ex_si, cls, subj):
    M = ex_ac.shape[0]
    J = ex_si.shape[0]
    T = cls.shape[0]
    w = np.empty((M, T))
    for t in prange(T):
        l = subj[t]
        for m in range(M):
            acc = 0.0
            for j in range(J):
                acc += ex_ai[l, m, j] * ex_si[j, t]
            w[m, t] = ex_ac[m, cls[t]] + acc
    return w


@njit(parallel=True, cache=True)
def common_stats(X, pi1, w, cls, K):
    M, T = X.shape
    rho = np.zeros((M, K))
    tau = np.zeros((M, K))
    for m in prange(M):
        for t in range(T):
            k = cls[t]
            rho[m, k] += 1.0 / w[m, t]
            tau[m, k] += pi1[m, t] * pi1[m, t] * X[m, t]
    return rho, tau


@njit(parallel=True, cache=True)
def individual_basis_stats(X, pi2, psi, w, ex_si, einv_si, offsets):
    L = offsets.shape[0] - 1
    J = psi.shape[0]
    M = X.shape[0]
    rho = np.zeros((L, M, J))
    tau = np.zeros((L, M, J))
    for lm in prange(L * M):
        l = lm // M
        m = lm % M
        for t in range(offsets[l], offsets[l + 1]):
            p2 = pi2[m, t]
            base = p2 * p2 * X[m, t]
            iw = 1.0 / w[m, t]
            for j in range(J):
                rho[l, m, j] += iw * ex_si[j, t]
                tau[l, m, j] += _safe_mul(base * psi[j, m, t] * psi[j, m, t], einv_si[j, t])
    return rho, tau


@njit(parallel=True, cache=True)
def activation_stats(X, pi2, psi, w, ex_ai, einv_ai, subj):
    J = psi.shape[0]
    M, T = X.shape
    rho = np.zeros((J, T))
    tau = np.zeros((J, T))
    for t in prange(T):
        l = subj[t]
        for m in range(M):
            p2 = pi2[m, t]
            base = p2 * p2 * X[m, t]
            iw = 1.0 / w[m, t]
            for j in range(J):
                rho[j, t] += ex_ai[l, m, j] * iw
                tau[j, t] += _safe_mul(base * psi[j, m, t] * psi[j, m, t], einv_ai[l, m, j])
    return rho, tau


@njit(parallel=True, cache=True)
def bound_cells(X, pi1, pi2, psi, w, ex_ac, einv_ac, ex_ai, einv_ai, ex_si, einv_si, cls, subj):
    M, T = X.shape
    J = psi.shape[0]
    out = np.empty((M, T))
    for t in prange(T):
        l = subj[t]
        k = cls[t]
        for m in range(M):
            x = X[m, t]
            p1 = pi1[m, t]
            p2 = pi2[m, t]
            jen = _safe_mul(p1 * p1 * x, einv_ac[m, k])
            recon = ex_ac[m, k]
            for j in range(J):
                jen += _safe_mul(p2 * p2 * x * psi[j, m, t] * psi[j, m, t], einv_ai[l, m, j] * einv_si[j, t])
                recon += ex_ai[l, m, j] * ex_si[j, t]
            out[m, t] = -jen - math.log(w[m, t]) + 1.0 - recon / w[m, t]
    return out
