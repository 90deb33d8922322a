"""Vectorized numpy versions of the special-function kernels.

Same algorithm as :mod:`groupfact.kernels.special_nb`; the iterative series and
continued fraction run over the set of still-unconverged entries, which shrinks
each pass.
"""

import numpy as np
from scipy.special import digamma, gammaln

from ._consts import DEGENERATE, EPS, FD_STEP, MAXIT, RGAMMA1P


def _temme_gammas(mu):
    mu2 = mu * mu
    gam1 = np.zeros_like(mu)
    gam2 = np.zeros_like(mu)
    p = np.ones_like(mu)
    for k in range(0, RGAMMA1P.shape[0] - 1, 2):
        gam2 += RGAMMA1P[k] * p
        gam1 -= RGAMMA1P[k + 1] * p
        p *= mu2
    return gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1


def _low_order_temme(mu, x):
    x2 = 0.5 * x
    pimu = np.pi * mu
    with np.errstate(invalid="ignore", divide="ignore"):
        fact = np.where(pimu == 0.0, 1.0, pimu / np.sin(pimu))
        d = -np.log(x2)
        e = mu * d
        fact2 = np.where(e == 0.0, 1.0, np.sinh(e) / e)
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    s = ff.copy()
    e = np.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = np.ones_like(mu)
    d = x2 * x2
    s1 = p.copy()

    log_k = np.empty_like(mu)
    ratio = np.empty_like(mu)
    idx = np.arange(mu.shape[0])
    for i in range(1, MAXIT):
        if idx.size == 0:
            break
        m = mu[idx]
        ff = (i * ff + p + q) / (i * i - m * m)
        c = c * d / i
        p = p / (i - m)
        q = q / (i + m)
        dl = c * ff
        s = s + dl
        s1 = s1 + c * (p - i * ff)
        done = np.abs(dl) < np.abs(s) * EPS
        if done.any():
            j = idx[done]
            log_k[j] = np.log(s[done])
            ratio[j] = s1[done] / (x2[j] * s[done])
            keep = ~done
            idx, ff, p, q, c, d, s, s1 = idx[keep], ff[keep], p[keep], q[keep], c[keep], d[keep], s[keep], s1[keep]
    return log_k, ratio


def _low_order_steed(mu, x):
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = a1.copy()
    c = a1.copy()
    a = -a1
    s = 1.0 + q * delh

    log_k = np.empty_like(mu)
    ratio = np.empty_like(mu)
    idx = np.arange(mu.shape[0])
    for i in range(1, MAXIT):
        if idx.size == 0:
            break
        a = a - 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        done = np.abs(dels / s) < EPS
        if done.any():
            j = idx[done]
            xj = x[j]
            log_k[j] = 0.5 * np.log(np.pi / (2.0 * xj)) - np.log(s[done])
            ratio[j] = (mu[j] + xj + 0.5 - a1[done] * h[done]) / xj
            keep = ~done
            idx = idx[keep]
            a, c, q1, q2, q, b, d, delh, h, s, a1 = (
                a[keep], c[keep], q1[keep], q2[keep], q[keep], b[keep], d[keep],
                delh[keep], h[keep], s[keep], a1[keep])
    return log_k, ratio


def log_bessel_k_scaled(nu, x):
    nu = np.abs(np.asarray(nu, dtype=float))
    x = np.asarray(x, dtype=float)
    nu, x = np.broadcast_arrays(nu, x)
    shape = nu.shape
    nu = nu.ravel()
    x = x.ravel()
    out = np.full(nu.shape, np.nan)
    ok = (x > 0) & np.isfinite(x) & np.isfinite(nu)
    nl = np.floor(nu + 0.5)
    mu = nu - nl
    lk = np.empty_like(nu)
    r = np.empty_like(nu)
    small = ok & (x <= 2.0)
    large = ok & (x > 2.0)
    if small.any():
        lk[small], r[small] = _low_order_temme(mu[small], x[small])
        lk[small] += x[small]
    if large.any():
        lk[large], r[large] = _low_order_steed(mu[large], x[large])
    steps = int(nl[ok].max()) if ok.any() else 0
    for i in range(steps):
        live = ok & (nl > i)
        lk[live] += np.log(r[live])
        r[live] = 2.0 * (mu[live] + i + 1) / x[live] + 1.0 / r[live]
    out[ok] = lk[ok]
    return out.reshape(shape)


def log_bessel_k(nu, x):
    return log_bessel_k_scaled(nu, x) - np.asarray(x, dtype=float)


def gig_moments(gamma, rho, tau):
    """Arrays (E[x], E[1/x], E[log x], log Z); see the numba kernel for conventions."""
    gamma, rho, tau = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(gamma, rho, tau))
    e_x = np.full(gamma.shape, np.nan)
    e_inv = np.full(gamma.shape, np.nan)
    e_log = np.full(gamma.shape, np.nan)
    log_z = np.full(gamma.shape, np.nan)

    finite = np.isfinite(gamma) & np.isfinite(rho) & np.isfinite(tau) & (rho >= 0) & (tau >= 0)
    gam = finite & (tau < DEGENERATE) & (rho >= DEGENERATE) & (gamma > 0)
    inv = finite & (tau >= DEGENERATE) & (rho < DEGENERATE) & (gamma < 0)
    gig = finite & (tau >= DEGENERATE) & (rho >= DEGENERATE)

    with np.errstate(divide="ignore", invalid="ignore"):
        g, r = gamma[gam], rho[gam]
        e_x[gam] = g / r
        e_inv[gam] = np.where(g > 1.0, r / (g - 1.0), np.inf)
        e_log[gam] = digamma(g) - np.log(r)
        log_z[gam] = gammaln(g) - g * np.log(r)

        sh, t = -gamma[inv], tau[inv]
        e_x[inv] = np.where(sh > 1.0, t / (sh - 1.0), np.inf)
        e_inv[inv] = sh / t
        e_log[inv] = np.log(t) - digamma(sh)
        log_z[inv] = gammaln(sh) - sh * np.log(t)

    g, r, t = gamma[gig], rho[gig], tau[gig]
    z = 2.0 * np.sqrt(r) * np.sqrt(t)
    hlr = 0.5 * np.log(t / r)
    lk = log_bessel_k_scaled(g, z)
    e_x[gig] = np.exp(hlr + log_bessel_k_scaled(g + 1.0, z) - lk)
    e_inv[gig] = np.exp(-hlr + log_bessel_k_scaled(g - 1.0, z) - lk)
    dnu = (log_bessel_k_scaled(g + FD_STEP, z) - log_bessel_k_scaled(g - FD_STEP, z)) / (2.0 * FD_STEP)
    e_log[gig] = hlr + dnu
    log_z[gig] = np.log(2.0) + g * hlr + lk - z
    return e_x, e_inv, e_log, log_z
