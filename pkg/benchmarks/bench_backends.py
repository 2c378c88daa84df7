"""Timing comparison of the compiled kernels against the numpy fallback.

Runs the four hot paths (axiom scans, contraction check, orbit batches,
witness-row scan) under each backend and prints best-of-N wall times.

    python3 benchmarks/bench_backends.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fixlab import backend, kernels
from fixlab.gauge import analytic_map, verify_contraction
from fixlab.phi import comparison_function
from fixlab.picard import iterate
from fixlab.seqlab import lemma1_witness, sequence_from_points
from fixlab.space import analytic_space, classify_structure


def build_cases():
    big = analytic_space("max(x, y)", 0.0, 1.0, grid=161)
    tmap = analytic_map("x / 2", big)
    phi = comparison_function("t / 2", monotone=True)

    orbit_space = analytic_space("abs(x - y)", 0.0, 1.0, grid=65)
    orbit_map = analytic_map("x * 0.999", orbit_space)
    starts = np.linspace(0.01, 1.0, 200)

    walk = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 200001))])
    prefix = sequence_from_points(walk)

    return {
        "classify 161-grid space": lambda: classify_structure(big),
        "contraction check (25.9k pairs)": lambda: verify_contraction(
            big, tmap, phi, "M2"
        ),
        "200 slow orbits": lambda: [
            iterate(orbit_space, orbit_map, float(x0), tol=1e-9, max_iters=2000)
            for x0 in starts
        ],
        "witness rows, 200k points": lambda: lemma1_witness(
            prefix, eps=0.25, j_max=200
        ),
    }


def best_of(fn, repeats: int) -> float:
    fn()  # warm cache and JIT before timing
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    names = ["numpy"]
    if backend.numba_available():
        kernels.warmup()
        names.insert(0, "numba")
    else:
        print("numba not importable; timing the numpy path only")

    cases = build_cases()
    results = {name: {} for name in names}
    for name in names:
        with backend.use(name):
            for label, fn in cases.items():
                results[name][label] = best_of(fn, args.repeats)

    width = max(len(label) for label in cases)
    header = f"{'case':<{width}}" + "".join(f"  {n:>10}" for n in names)
    if len(names) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for label in cases:
        row = f"{label:<{width}}"
        for name in names:
            row += f"  {results[name][label]:>9.4f}s"
        if len(names) == 2:
            row += f"  {results['numpy'][label] / results['numba'][label]:>7.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
