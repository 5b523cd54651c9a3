"""Throughput benchmark: compiled rate kernel vs the NumPy fallback.

Builds the bundled 39-bus system, draws Gaussian injection samples,
and times ``rate_table`` (one concave maximization per line) on both
backends over a range of sample sizes. Rates must agree to 1e-9 (the
cross-backend contract) before timings are reported.

Usage:
    python3 benchmarks/rate_kernel_bench.py [--sizes 1000,10000,100000]
                                            [--repeats 5] [--seed 0]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from linerank import build_dc_model, load_case39
from linerank import _ratefn_py as pure
from linerank.stochastic import default_gaussian_model

try:
    from linerank import _ratefn as compiled
except ImportError:
    compiled = None


def _time_table(impl, fabs, n, gamma, repeats):
    lam0 = np.zeros(gamma.shape[0])
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = impl.rate_table(fabs, n, gamma, lam0)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1000,10000,100000",
                        help="comma-separated sample counts")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions, best-of")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    model = build_dc_model(load_case39())
    injections, _ = default_gaussian_model(model, seed=args.seed)
    fabs = np.abs(model.flow_samples(injections.sample(max(sizes), args.seed))).T
    fabs = np.ascontiguousarray(fabs)
    gamma = model.gamma
    m = gamma.shape[0]

    if compiled is None:
        print("compiled kernel not built; timing the NumPy fallback only")
    print(f"{m} lines, best of {args.repeats} runs")
    print(f"{'n':>8}  {'python':>10}  {'compiled':>10}  {'speedup':>7}")
    for n in sizes:
        t_py, r_py = _time_table(pure, fabs, n, gamma, args.repeats)
        if compiled is not None:
            t_c, r_c = _time_table(compiled, fabs, n, gamma, args.repeats)
            np.testing.assert_allclose(r_c[0], r_py[0], rtol=0, atol=1e-9)
            np.testing.assert_array_equal(r_c[2], r_py[2])
            print(f"{n:>8}  {t_py:>9.4f}s  {t_c:>9.4f}s  {t_py / t_c:>6.1f}x")
        else:
            print(f"{n:>8}  {t_py:>9.4f}s  {'-':>10}  {'-':>7}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
