#!/usr/bin/env python3
"""Benchmark: numba kernels vs the vectorized numpy fallback.

Times the GIG moment kernel on a batch of random parameters and a short fit
on synthetic data, with both backends, and checks that the results agree.

Usage:
    python benchmarks/bench_backends.py [--moments N] [--subjects L] [--features M] [--frames N]
                                        [--sweeps S] [--repeat R] [--threads T]
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from groupfact import _backend, kernels
from groupfact.inference import FitOptions, fit
from groupfact.model import Hyperparams, sample_dataset


@dataclass
class BenchmarkResult:
    name: str
    backend: str
    best_s: float
    per_unit_us: float


def _best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_moments(n: int, repeat: int) -> tuple[list[BenchmarkResult], float]:
    rng = np.random.default_rng(0)
    g = rng.uniform(0.05, 10, n)
    r = 10 ** rng.uniform(-3, 3, n)
    t = 10 ** rng.uniform(-3, 3, n)
    results, outs = [], {}
    for name in _backends():
        with _backend.use(name):
            kernels.gig_moments(g[:10], r[:10], t[:10])  # compile / warm up
            best, outs[name] = _best_of(lambda: kernels.gig_moments(g, r, t), repeat)
        results.append(BenchmarkResult("gig_moments", name, best, best / n * 1e6))
    diff = _max_rel(outs)
    return results, diff


def bench_fit(L: int, M: int, N: int, sweeps: int, repeat: int) -> tuple[list[BenchmarkResult], float]:
    h = Hyperparams()
    data, _ = sample_dataset(h, L, M, N, seed=0)
    opts = FitOptions(max_iters=sweeps, min_iters=sweeps)
    results, outs = [], {}
    for name in _backends():
        with _backend.use(name):
            fit(data, h, FitOptions(max_iters=1))  # compile / warm up
            best, (post, trace) = _best_of(lambda: fit(data, h, opts), repeat)
        outs[name] = (np.array([p.elbo for p in trace]),)
        results.append(BenchmarkResult(f"fit L={L} M={M} N={N}", name, best, best / sweeps * 1e6))
    return results, _max_rel(outs)


def _backends() -> list[str]:
    return ["numba", "numpy"] if _backend.HAVE_NUMBA else ["numpy"]


def _max_rel(outs: dict) -> float:
    if len(outs) < 2:
        return float("nan")
    a, b = outs["numba"], outs["numpy"]
    worst = 0.0
    for u, v in zip(a, b):
        u, v = np.asarray(u), np.asarray(v)
        worst = max(worst, float(np.max(np.abs(u - v) / np.maximum(np.abs(v), 1.0))))
    return worst


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--moments", type=int, default=200_000, help="GIG parameter triples")
    ap.add_argument("--subjects", type=int, default=3)
    ap.add_argument("--features", type=int, default=96)
    ap.add_argument("--frames", type=int, default=300, help="frames per subject")
    ap.add_argument("--sweeps", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None, help="numba worker threads")
    args = ap.parse_args()
    _backend.set_threads(args.threads)

    rows = []
    res, d_mom = bench_moments(args.moments, args.repeat)
    rows += res
    res, d_fit = bench_fit(args.subjects, args.features, args.frames, args.sweeps, args.repeat)
    rows += res

    print(f"{'benchmark':<28}{'backend':<9}{'best [s]':>10}{'per unit [us]':>16}")
    for r in rows:
        print(f"{r.name:<28}{r.backend:<9}{r.best_s:>10.4f}{r.per_unit_us:>16.2f}")
    by = {(r.name, r.backend): r.best_s for r in rows}
    for name in dict.fromkeys(r.name for r in rows):
        if (name, "numba") in by:
            print(f"speedup {name}: {by[(name, 'numpy')] / by[(name, 'numba')]:.1f}x")
    print(f"max difference (relative above 1, absolute below): moments {d_mom:.2e}, ELBO trace {d_fit:.2e}")


if __name__ == "__main__":
    main()
