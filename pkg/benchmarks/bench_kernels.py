"""Benchmark: compiled kernel extension vs pure-Python fallback.

Times the three hot kernels at pipeline-realistic sizes and prints the
speedup.  Results are also sanity-checked for bitwise agreement, since the
two backends promise identical accumulation order.

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from ptge.kernels import available_backends


def time_call(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench(repeats: int) -> None:
    backends = available_backends()
    if "native" not in backends:
        print("native extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)

    cases = []

    a = rng.standard_normal(512).astype(np.float32)
    b = rng.standard_normal(512).astype(np.float32)

    def run_dot(impl):
        for _ in range(2000):
            impl.dot_norms(a, b)

    cases.append(("dot_norms 512-dim x2000 (pair scoring)", run_dot))

    q = rng.standard_normal(256).astype(np.float32)
    m = rng.standard_normal((2000, 256)).astype(np.float32)

    def run_matrix(impl):
        impl.cosine_against_matrix(q, m)

    cases.append(("cosine_against_matrix 2000x256 (gallery ranking)", run_matrix))

    x = rng.standard_normal((2000, 32))
    c = rng.standard_normal((8, 32))

    def run_assign(impl):
        impl.assign_to_centroids(x, c)

    cases.append(("assign_to_centroids 2000x32, k=8 (k-means step)", run_assign))

    pure, native = backends["pure"], backends["native"]
    assert pure.dot_norms(a, b) == native.dot_norms(a, b), "backends disagree"

    header = f"{'kernel':<52} {'pure':>10} {'native':>10} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, runner in cases:
        t_pure = time_call(runner, pure, repeats=repeats)
        t_native = time_call(runner, native, repeats=repeats)
        print(f"{name:<52} {t_pure * 1e3:>8.1f}ms {t_native * 1e3:>8.1f}ms {t_pure / t_native:>8.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    bench(parser.parse_args().repeats)
