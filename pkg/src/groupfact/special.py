"""Log-scale Bessel K and moments of the GIG and Gamma families.

The GIG density used throughout is proportional to
``x**(gamma - 1) * exp(-rho * x - tau / x)`` on ``x > 0``. ``tau -> 0`` gives
Gamma(shape=gamma, rate=rho); ``rho -> 0`` gives an inverse Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import DomainError, MomentUndefinedError
from .kernels._consts import DEGENERATE


@dataclass(frozen=True)
class GigParams:
    gamma: float
    rho: float
    tau: float

    def __post_init__(self):
        g, r, t = self.gamma, self.rho, self.tau
        if not all(math.isfinite(v) for v in (g, r, t)):
            raise DomainError(f"GIG parameters must be finite, got {self}")
        if r < 0 or t < 0:
            raise DomainError(f"rho and tau must be >= 0, got {self}")
        if r < DEGENERATE and t < DEGENERATE:
            raise DomainError(f"rho and tau cannot both vanish, got {self}")
        if t < DEGENERATE and g <= 0:
            raise DomainError(f"Gamma limit (tau=0) needs gamma > 0, got {self}")
        if r < DEGENERATE and g >= 0:
            raise DomainError(f"inverse-Gamma limit (rho=0) needs gamma < 0, got {self}")


@dataclass(frozen=True)
class GigMoments:
    e_x: float
    e_inv_x: float
    e_log_x: float


def log_bessel_k(nu, x):
    """Natural log of the modified Bessel function of the second kind.

    Parameters
    ----------
    nu : float or array_like
        Order; ``K_{-nu} = K_nu`` so the sign is irrelevant.
    x : float or array_like
        Argument, strictly positive.

    Returns
    -------
    float or ndarray
        ``log K_nu(x)``, evaluated without forming ``K_nu(x)`` itself, so it
        stays finite where ``K`` would over- or underflow.
    """
    nu_a = np.asarray(nu, dtype=float)
    x_a = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(nu_a)) and np.all(np.isfinite(x_a))):
        raise DomainError("log_bessel_k needs finite order and argument")
    if np.any(x_a <= 0):
        raise DomainError("log_bessel_k needs x > 0")
    out = kernels.log_bessel_k(nu_a, x_a)
    if out.ndim == 0:
        return float(out)
    return out


def gig_moments(p: GigParams, strict: bool = True) -> GigMoments:
    """E[x], E[1/x] and E[log x] of a GIG (or its Gamma / inverse-Gamma limit).

    Raises :class:`MomentUndefinedError` when a moment diverges, e.g. E[1/x]
    of a Gamma with shape <= 1. With ``strict=False`` a divergent moment is
    returned as ``inf`` instead, which is enough for entropies and
    cross-entropies that do not involve it.
    """
    e_x, e_inv, e_log, _ = (float(v) for v in kernels.gig_moments(p.gamma, p.rho, p.tau))
    if not strict:
        return GigMoments(e_x, e_inv, e_log)
    if math.isinf(e_inv):
        raise MomentUndefinedError(f"E[1/x] diverges for {p} (Gamma limit with gamma <= 1)")
    if math.isinf(e_x):
        raise MomentUndefinedError(f"E[x] diverges for {p} (inverse-Gamma limit with -gamma <= 1)")
    return GigMoments(e_x, e_inv, e_log)


def gig_log_normalizer(p: GigParams) -> float:
    """log of the integral of the unnormalized density."""
    return float(kernels.gig_moments(p.gamma, p.rho, p.tau)[3])


def gig_entropy(p: GigParams, m: GigMoments) -> float:
    """Differential entropy -E_q[log q(x)]."""
    return float(gig_entropy_array(p.gamma, p.rho, p.tau, m.e_x, m.e_inv_x, m.e_log_x,
                                   gig_log_normalizer(p)))


def gamma_cross_entropy(shape: float, rate: float, m: GigMoments) -> float:
    """E_q[log Gamma(x; shape, rate)] given moments of q (rate parameterization)."""
    if not (shape > 0 and rate > 0):
        raise DomainError(f"Gamma shape and rate must be > 0, got shape={shape}, rate={rate}")
    return float(gamma_cross_entropy_array(shape, rate, m.e_x, m.e_log_x))


def gig_entropy_array(gamma, rho, tau, e_x, e_inv, e_log, log_z):
    # in the Gamma / inverse-Gamma limits the vanishing coefficient wins over a
    # divergent moment
    tau = np.asarray(tau, dtype=float)
    rho = np.asarray(rho, dtype=float)
    with np.errstate(invalid="ignore"):
        inv_term = np.where(tau >= DEGENERATE, tau * e_inv, 0.0)
        lin_term = np.where(rho >= DEGENERATE, rho * e_x, 0.0)
    return log_z - (np.asarray(gamma) - 1.0) * e_log + lin_term + inv_term


def gamma_cross_entropy_array(shape, rate, e_x, e_log):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * e_log - rate * e_x
