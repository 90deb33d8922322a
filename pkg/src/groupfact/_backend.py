"""Kernel backend selection.

``GROUPFACT_BACKEND=numba`` (default when numba imports) runs the jitted loop
kernels; ``GROUPFACT_BACKEND=numpy`` runs the vectorized numpy fallbacks. The
variable is read once at import; :func:`use` switches at runtime.
"""

from __future__ import annotations

import contextlib
import os
import sys

if sys.platform.startswith("linux"):
    # numba probes TBB first and warns when the system copy is too old
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

BACKENDS = ("numba", "numpy")


def _from_env() -> str:
    name = os.environ.get("GROUPFACT_BACKEND", "numba" if HAVE_NUMBA else "numpy").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"GROUPFACT_BACKEND must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        name = "numpy"
    return name


_current = _from_env()


def current() -> str:
    return _current


def set_backend(name: str) -> None:
    global _current
    if name not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _current = name


@contextlib.contextmanager
def use(name: str):
    """Temporarily switch backend (tests and benchmarks)."""
    prev = _current
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def set_threads(n: int | None) -> None:
    """Cap numba's worker pool. No-op for the numpy backend."""
    if n is None or not HAVE_NUMBA:
        return
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
