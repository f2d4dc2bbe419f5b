"""Compare the compiled and pure-Python integration kernels.

Usage: python benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""

import argparse
import time

import numpy as np

from magorbit import _core
from magorbit.dynamics import flat_torus_system, sphere_system
from magorbit.geometry import cosine_field_t2


def _kernels(sys):
    args = sys.kernel_arguments()
    kw = dict(kappa=sys.kappa, newton_tol=1e-12, max_newton=20)
    out = {"python": _core.PyFieldKernel(*args, **kw)}
    if _core.CyFieldKernel is not None:
        out["cython"] = _core.CyFieldKernel(*args, **kw)
    return out


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    cases = [
        ("T2 variable B", flat_torus_system(2, cosine_field_t2()), np.array([0.1, 0.2, 0.1, 0.05])),
        ("S2 zonal", sphere_system((1.0, 0.3)), np.array([0.3, 0.2, 0.1, -0.05])),
    ]
    print(f"{'system':<16}{'backend':<10}{'run [s]':>10}{'us/step':>10}{'rhs [us]':>10}{'speedup':>9}")
    for label, sys, z0 in cases:
        base = None
        for name, kern in _kernels(sys).items():
            t_run = _best(lambda: kern.run(z0, 0, 1e-3, args.steps), args.repeat)
            t_rhs = _best(lambda: [kern.rhs(z0, 0) for _ in range(1000)], args.repeat) / 1000
            base = base or t_run
            print(f"{label:<16}{name:<10}{t_run:>10.4f}{1e6 * t_run / args.steps:>10.2f}"
                  f"{1e6 * t_rhs:>10.2f}{base / t_run:>9.1f}x")
    if _core.CyFieldKernel is None:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
