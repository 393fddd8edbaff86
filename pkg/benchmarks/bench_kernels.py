"""Compare the compiled and pure-Python stepping kernels.

Runs the same Dormand-Prince calls through both backends, reports the best
wall time of several repeats and the largest relative difference of the
final state.

    python benchmarks/bench_kernels.py [--repeat 3] [--t1 200]
"""

import argparse
import time

import numpy as np

from cubic3d import _pykernel
from cubic3d.systems import cubic2, lorenz

try:
    from cubic3d import _ckernel
except ImportError:
    _ckernel = None

# (label, mode, state dimension): mode 0 records endpoints, 1 every step, 2 also dense coefficients
CASES = [
    ("endpoints", 0, 3),
    ("stored steps", 1, 3),
    ("dense output", 2, 3),
    ("variational", 0, 12),
]


def _args(sys, y0, t1, mode, dim):
    y = np.asarray(y0, float)
    if dim == 12:
        y = np.concatenate([y, np.eye(3).ravel()])
    return (sys.kernel_code, np.asarray(sys.kernel_params, float), y, 0.0, t1, 1e-10, 1e-10, 1.0, 1e-12,
            1e3, 10**8, mode, np.zeros((0, 3)), 0.0)


def _best(fn, args, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t1", type=float, default=200.0, help="integration span per call")
    ns = ap.parse_args(argv)
    if _ckernel is None:
        print("compiled kernel not built; only the Python backend is available")
    systems = [("cubic2 b=0.317", cubic2(0.317), (1.2, 0.0, -1.5)), ("lorenz", lorenz(), (1.0, 1.0, 1.0))]
    print(f"{'system':16s} {'case':14s} {'steps':>8s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} "
          f"{'rel diff':>9s}")
    for name, sys, y0 in systems:
        for label, mode, dim in CASES:
            args = _args(sys, y0, ns.t1, mode, dim)
            tp, outp = _best(_pykernel.dopri5, args, ns.repeat)
            steps = int(outp[6][0])
            if _ckernel is None:
                print(f"{name:16s} {label:14s} {steps:8d} {tp:10.4f} {'-':>10s} {'-':>8s} {'-':>9s}")
                continue
            tc, outc = _best(_ckernel.dopri5, args, ns.repeat)
            yc, yp = np.asarray(outc[2]), np.asarray(outp[2])
            diff = float(np.max(np.abs(yc - yp) / np.maximum(1.0, np.abs(yc))))
            print(f"{name:16s} {label:14s} {steps:8d} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
