"""Compiled core vs pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--trials 20000]

Each row times the same call with both kernel sets and checks that the
results agree.
"""

import argparse
import timeit

import numpy as np
from scipy import integrate

from repeatcap import _pykernels

try:
    from repeatcap import _kernels
except ImportError:
    _kernels = None


def quad_case(kern):
    # the BinTrunc exponent at a large argument, as in the deletion tables
    def run():
        return integrate.quad(kern.TRUNC_INTEGRAND, 0.0, 1.0, args=(0.3, 2000.0, 1.0),
                              epsabs=1e-11, epsrel=1e-13, limit=200, points=[1 / 600.0])[0]
    return run


def eta_case(kern):
    def run():
        a = integrate.quad(kern.ETA_REMAINDER, 0.7, 1.0, epsabs=1e-13)[0]
        return a + integrate.quad(kern.ETA_TAIL, 1.0, np.inf, epsabs=1e-13)[0]
    return run


def lerch_case(kern):
    def run():
        return kern.lerch_series(0.99, -0.5, 1.2, 1e-14, 100_000)[0]
    return run


def sim_case(kern, trials, composed):
    bits = np.array([0, 0, 0, 1, 1, 0, 0, 0, 0, 1], dtype=np.int64)
    width = 2 * bits.size if composed else bits.size
    u = np.random.default_rng(0).random((trials, width))

    def run():
        if composed:
            return kern.composed_runs(bits, 1, 1.0, 1 - np.exp(-1.0), u, 3, 30)
        return kern.direct_runs(bits, 1, 1.0, u, 3, 30)
    return run


def same(a, b):
    if isinstance(a, np.ndarray):
        return bool(np.array_equal(a, b))
    return abs(a - b) <= 1e-12 * max(1.0, abs(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=20_000)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled core not built; run `pip install -e . --no-build-isolation`")
        return
    cases = [
        ("quad trunc integrand", lambda k: quad_case(k)),
        ("quad eta integrands", lambda k: eta_case(k)),
        ("lerch series z=0.99", lambda k: lerch_case(k)),
        (f"direct runs x{args.trials}", lambda k: sim_case(k, args.trials, False)),
        (f"composed runs x{args.trials}", lambda k: sim_case(k, args.trials, True)),
    ]
    print(f"{'case':<28}{'cython s':>12}{'python s':>12}{'speedup':>10}  agree")
    for name, make in cases:
        fc, fp = make(_kernels), make(_pykernels)
        tc = min(timeit.repeat(fc, number=1, repeat=args.repeat))
        tp = min(timeit.repeat(fp, number=1, repeat=max(1, args.repeat // 2)))
        print(f"{name:<28}{tc:>12.5f}{tp:>12.5f}{tp / tc:>10.1f}  {same(fc(), fp())}")


if __name__ == "__main__":
    main()
