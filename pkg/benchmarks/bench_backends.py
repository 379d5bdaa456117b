"""Compare the compiled scoring kernel against the pure-Python fallback.

Times per_point_terms on a grid of problem sizes (best of several repeats),
verifies both backends agree bit-for-bit on each case, and finishes with a
small end-to-end evaluation timing.

Run:  python benchmarks/bench_backends.py
"""

from __future__ import annotations

import time

import numpy as np

from fewshot_icnn import _score_py
from fewshot_icnn.core import EpisodeSpec
from fewshot_icnn.pipeline import PipelineConfig, evaluate
from fewshot_icnn.synth import SynthSpec, generate_store

try:
    from fewshot_icnn import _score_cy
except ImportError:
    _score_cy = None

REPEATS = 5


def best_of(fn, *args) -> float:
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel() -> None:
    print(f"{'n':>6} {'d':>5} {'k':>3} {'python_ms':>10} {'compiled_ms':>12} "
          f"{'speedup':>8}")
    rng = np.random.default_rng(0)
    for n, d, k in ((25, 6, 5), (100, 6, 5), (100, 64, 5), (400, 64, 7),
                    (1000, 64, 7), (1000, 512, 7)):
        x = rng.normal(size=(n, d))
        ids = rng.integers(0, 5, size=n).astype(np.int64)
        t_py = best_of(_score_py.per_point_terms, x, ids, k)
        if _score_cy is None:
            print(f"{n:6d} {d:5d} {k:3d} {t_py * 1e3:10.3f} {'n/a':>12} {'n/a':>8}")
            continue
        t_cy = best_of(_score_cy.per_point_terms, x, ids, k)
        for a, b in zip(_score_py.per_point_terms(x, ids, k),
                        _score_cy.per_point_terms(x, ids, k)):
            if not np.array_equal(a, b):
                raise AssertionError(f"backend mismatch at n={n} d={d} k={k}")
        print(f"{n:6d} {d:5d} {k:3d} {t_py * 1e3:10.3f} {t_cy * 1e3:12.3f} "
              f"{t_py / t_cy:8.2f}x")


def bench_end_to_end() -> None:
    store = generate_store(SynthSpec(5, 100, 6, 58, class_separation=3,
                                     noise_scale=4, seed=7))
    config = PipelineConfig(episodes=100, seed=0, workers=1)
    spec = EpisodeSpec(5, 5, 15)
    t0 = time.perf_counter()
    report = evaluate(store, spec, config)
    dt = time.perf_counter() - t0
    print(f"\nend-to-end: 100 episodes 5-way 5-shot in {dt:.2f}s "
          f"({dt * 10:.1f}ms/episode), accuracy {report.summary()}")


if __name__ == "__main__":
    if _score_cy is None:
        print("compiled kernel not available; timing the fallback only\n")
    bench_kernel()
    bench_end_to_end()
