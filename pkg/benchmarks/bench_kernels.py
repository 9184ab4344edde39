"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 20] [--size 64x200]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from uacesd.denoisers import QPSK
from uacesd.kernels import load_backend


def make_inputs(rows: int, cols: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    Q = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)
    V = rng.uniform(0.05, 1.0, (rows, cols))
    llr = rng.standard_normal((cols * 4, 2)) * 3
    return Q, V, llr


def bench(backend, Q, V, llr, repeat: int) -> dict[str, float]:
    logw = np.log(np.full(4, 0.25))
    cases = {
        "discrete_posterior": lambda: backend.discrete_posterior(Q, V, QPSK, logw),
        "bg_posterior": lambda: backend.bg_posterior(Q, V, 0.1, 1.0, False),
        "viterbi57": lambda: backend.viterbi57(llr),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--size", default="64x200", help="rows x cols of the denoiser input")
    args = p.parse_args(argv)
    rows, cols = (int(s) for s in args.size.lower().split("x"))
    Q, V, llr = make_inputs(rows, cols)
    py = bench(load_backend("python"), Q, V, llr, args.repeat)
    try:
        cy = bench(load_backend("cython"), Q, V, llr, args.repeat)
    except ImportError:
        print("compiled extension not built; only the numpy timings are shown")
        cy = {k: float("nan") for k in py}
    print(f"{'kernel':<20}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name in py:
        print(f"{name:<20}{py[name] * 1e3:>14.3f}{cy[name] * 1e3:>14.3f}{py[name] / cy[name]:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
