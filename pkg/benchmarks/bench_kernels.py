"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

import argparse
import time

import numpy as np

from saddlelab import kernels
from saddlelab.endo import family_Ftheta


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="one tenth of the work, for smoke runs")
    args = ap.parse_args(argv)
    scale = 10 if args.quick else 1
    npts, steps = 20_000 // scale, 100_000 // scale

    f = family_Ftheta(0.01)
    rng = np.random.default_rng(0)
    P = rng.normal(size=(npts, 3)) + 1j * rng.normal(size=(npts, 3))
    p0 = np.array([1.0, np.exp(0.3j), np.exp(0.15j)])
    q0 = np.eye(2, dtype=complex)
    cases = {
        f"green_batch ({npts} pts, depth 40)": lambda K: K.green_batch(f.monos, f.coefs, 2, P, 40),
        f"forward_orbit ({steps} steps)": lambda K: K.forward_orbit(f.monos, f.coefs, p0, steps, kernels.RETRACT_XY),
        f"lyapunov_qr ({steps} steps)": lambda K: K.lyapunov_qr(f.monos, f.coefs, p0, steps, kernels.RETRACT_XY, q0),
    }
    found = kernels.backends()
    print(f"backends available: {', '.join(found)}")
    print(f"{'kernel':<36}" + "".join(f"{name:>12}" for name in found) + f"{'speedup':>10}")
    for label, fn in cases.items():
        times = {name: _best(lambda: fn(mod), args.repeat) for name, mod in found.items()}
        row = f"{label:<36}" + "".join(f"{times[n]:>11.4f}s" for n in found)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
