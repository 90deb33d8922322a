"""Backend dispatch for the numeric kernels.

Each public function here routes to the numba implementation or the numpy
fallback according to :func:`groupfact._backend.current`.
"""

import numpy as np

from .. import _backend
from . import special_np, updates_np

if _backend.HAVE_NUMBA:
    from . import special_nb, updates_nb
else:  # pragma: no cover
    special_nb = updates_nb = None


def log_bessel_k(nu, x):
    nu, x = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    if _backend.current() == "numba":
        out = np.empty(nu.size)
        special_nb.log_bessel_k_many(np.ascontiguousarray(nu).ravel(), np.ascontiguousarray(x).ravel(), out)
        return out.reshape(nu.shape)
    return special_np.log_bessel_k(nu, x)


def gig_moments(gamma, rho, tau):
    """(E[x], E[1/x], E[log x], log Z) arrays, broadcast over the inputs."""
    gamma, rho, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (gamma, rho, tau)))
    if _backend.current() == "numba":
        shape = gamma.shape
        outs = [np.empty(gamma.size) for _ in range(4)]
        special_nb.gig_moments_many(np.ascontiguousarray(gamma).ravel(), np.ascontiguousarray(rho).ravel(),
                                    np.ascontiguousarray(tau).ravel(), *outs)
        return tuple(o.reshape(shape) for o in outs)
    return special_np.gig_moments(gamma, rho, tau)


def _updates():
    return updates_nb if _backend.current() == "numba" else updates_np


def aux(einv_ac, einv_ai, einv_si, cls, subj):
    return _updates().aux(einv_ac, einv_ai, einv_si, cls, subj)


def taylor_point(ex_ac, ex_ai, ex_si, cls, subj):
    return _updates().taylor_point(ex_ac, ex_ai, ex_si, cls, subj)


def common_stats(X, pi1, w, cls, K):
    return _updates().common_stats(X, pi1, w, cls, K)


def individual_basis_stats(X, pi2, psi, w, ex_si, einv_si, offsets):
    return _updates().individual_basis_stats(X, pi2, psi, w, ex_si, einv_si, offsets)


def activation_stats(X, pi2, psi, w, ex_ai, einv_ai, subj):
    return _updates().activation_stats(X, pi2, psi, w, ex_ai, einv_ai, subj)


def bound_cells(X, pi1, pi2, psi, w, ex_ac, einv_ac, ex_ai, einv_ai, ex_si, einv_si, cls, subj):
    return _updates().bound_cells(X, pi1, pi2, psi, w, ex_ac, einv_ac, ex_ai, einv_ai, ex_si, einv_si, cls, subj)
