"""Scalar special-function kernels compiled with numba.

log K_nu(x) follows the classic split: reduce the order to mu in [-1/2, 1/2),
get K_mu and K_{mu+1} from Temme's series (x <= 2) or Steed's continued
fraction (x > 2), then walk up to nu with the forward recurrence carried as a
ratio so nothing ever leaves log space.
"""

import math

from numba import njit, prange

from ._consts import DEGENERATE, EPS, FD_STEP, MAXIT, RGAMMA1P


@njit(cache=True)
def _temme_gammas(mu):
    # gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
    mu2 = mu * mu
    gam1 = 0.0
    gam2 = 0.0
    p = 1.0
    for k in range(0, RGAMMA1P.shape[0] - 1, 2):
        gam2 += RGAMMA1P[k] * p
        gam1 -= RGAMMA1P[k + 1] * p
        p *= mu2
    return gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1


@njit(cache=True)
def _low_order_temme(mu, x):
    """log K_mu(x) and K_{mu+1}/K_mu for |mu| <= 1/2, 0 < x <= 2."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if pimu == 0.0 else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if e == 0.0 else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    s = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    s1 = p
    for i in range(1, MAXIT):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= d / i
        p /= i - mu
        q /= i + mu
        dl = c * ff
        s += dl
        s1 += c * (p - i * ff)
        if abs(dl) < abs(s) * EPS:
            break
    return math.log(s), s1 / (x2 * s)


@njit(cache=True)
def _low_order_steed(mu, x):
    """log K_mu(x) + x and K_{mu+1}/K_mu for |mu| <= 1/2, x > 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25 - mu * mu
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, MAXIT):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < EPS:
            break
    h = a1 * h
    return 0.5 * math.log(math.pi / (2.0 * x)) - math.log(s), (mu + x + 0.5 - h) / x


@njit(cache=True)
def log_bessel_k_scaled(nu, x):
    """log(K_nu(x)) + x. Returns nan outside x > 0 or for non-finite input."""
    if not (x > 0.0) or not math.isfinite(x) or not math.isfinite(nu):
        return math.nan
    nu = abs(nu)
    nl = int(nu + 0.5)
    mu = nu - nl
    if x <= 2.0:
        lk, r = _low_order_temme(mu, x)
        lk += x
    else:
        lk, r = _low_order_steed(mu, x)
    for i in range(nl):
        lk += math.log(r)
        r = 2.0 * (mu + i + 1) / x + 1.0 / r
    return lk


@njit(cache=True)
def log_bessel_k(nu, x):
    return log_bessel_k_scaled(nu, x) - x


@njit(parallel=True, cache=True)
def log_bessel_k_many(nu, x, out):
    for i in prange(out.shape[0]):
        out[i] = log_bessel_k(nu[i], x[i])


@njit(cache=True)
def digamma(x):
    """psi(x) for x > 0: shift upward, then the asymptotic series."""
    if not (x > 0.0):
        return math.nan
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    t = f * (-1.0 / 12 + f * (1.0 / 120 + f * (-1.0 / 252 + f * (1.0 / 240 + f * (
        -1.0 / 132 + f * (691.0 / 32760 + f * (-1.0 / 12)))))))
    return acc + math.log(x) - 0.5 / x + t


@njit(cache=True)
def gig_moments_one(gamma, rho, tau):
    """(E[x], E[1/x], E[log x], log Z) for density x^(gamma-1) exp(-rho x - tau/x).

    Undefined inverse/direct moments of the limiting Gamma / inverse-Gamma come
    back as +inf; invalid parameters give nan everywhere.
    """
    nan = math.nan
    if not (math.isfinite(gamma) and math.isfinite(rho) and math.isfinite(tau)) or rho < 0.0 or tau < 0.0:
        return nan, nan, nan, nan
    if tau < DEGENERATE:
        if rho < DEGENERATE or gamma <= 0.0:
            return nan, nan, nan, nan
        e_inv = rho / (gamma - 1.0) if gamma > 1.0 else math.inf
        return (gamma / rho, e_inv, digamma(gamma) - math.log(rho),
                math.lgamma(gamma) - gamma * math.log(rho))
    if rho < DEGENERATE:
        if gamma >= 0.0:
            return nan, nan, nan, nan
        shape = -gamma
        e_x = tau / (shape - 1.0) if shape > 1.0 else math.inf
        return (e_x, shape / tau, math.log(tau) - digamma(shape),
                math.lgamma(shape) - shape * math.log(tau))
    z = 2.0 * math.sqrt(rho) * math.sqrt(tau)
    half_log_ratio = 0.5 * math.log(tau / rho)
    lk = log_bessel_k_scaled(gamma, z)
    e_x = math.exp(half_log_ratio + log_bessel_k_scaled(gamma + 1.0, z) - lk)
    e_inv = math.exp(-half_log_ratio + log_bessel_k_scaled(gamma - 1.0, z) - lk)
    dnu = (log_bessel_k_scaled(gamma + FD_STEP, z) - log_bessel_k_scaled(gamma - FD_STEP, z)) / (2.0 * FD_STEP)
    log_z = math.log(2.0) + gamma * half_log_ratio + lk - z
    return e_x, e_inv, half_log_ratio + dnu, log_z


@njit(parallel=True, cache=True)
def gig_moments_many(gamma, rho, tau, e_x, e_inv, e_log, log_z):
    for i in prange(gamma.shape[0]):
        e_x[i], e_inv[i], e_log[i], log_z[i] = gig_moments_one(gamma[i], rho[i], tau[i])
