"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--size 1000000] [--repeat 5]

Times each kernel on the same random inputs (after checking the two backends
agree), then a full simulated session under each backend in a subprocess.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hdqkd import _kernels_py

try:
    from hdqkd import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

SESSION = ("from hdqkd.sim import SessionConfig, run_session; import time; "
           "cfg = SessionConfig.uniform({n}, 1.0, 0.3, eta=0.6, transmittance=0.5, n_pulses={p}, seed=1); "
           "t = time.perf_counter(); run_session(cfg); print(time.perf_counter() - t)")


def kernel_inputs(size, n, rng):
    e, p, x = (rng.normal(0.3, 0.5, size=(size, n)) for _ in range(3))
    return {
        "classify_eve": (e, p),
        "orthant_tally": (e, p),
        "score_bob": (x, np.full(n, 0.3), rng.integers(0, 2, (size, n), dtype=np.uint8),
                      rng.integers(0, 2, size, dtype=np.uint8), rng.integers(0, 2, size, dtype=np.uint8)),
    }


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def session_time(n, pulses, pure):
    env = dict(os.environ)
    env.pop("HDQKD_PURE_PYTHON", None)
    if pure:
        env["HDQKD_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", SESSION.format(n=n, p=pulses)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pulses", type=int, default=2_000_000)
    args = ap.parse_args(argv)
    if _kernels_c is None:
        sys.exit("compiled extension not built; run `pip install --no-build-isolation -e .` first")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14} {'N':>2} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for n in (1, 2, 3):
        for name, kargs in kernel_inputs(args.size, n, rng).items():
            py_fn, c_fn = getattr(_kernels_py, name), getattr(_kernels_c, name)
            ref, got = py_fn(*kargs), c_fn(*kargs)
            for a, b in zip(*(r if isinstance(r, tuple) else (r,) for r in (ref, got))):
                np.testing.assert_array_equal(a, b)
            t_py, t_c = best_time(py_fn, kargs, args.repeat), best_time(c_fn, kargs, args.repeat)
            print(f"{name:<14} {n:>2} {1e3 * t_py:12.2f} {1e3 * t_c:12.2f} {t_py / t_c:8.1f}")

    print(f"\nsession, {args.pulses} pulses (eta=0.6, T=0.5)")
    for n in (1, 3):
        t_py, t_c = session_time(n, args.pulses, True), session_time(n, args.pulses, False)
        print(f"N={n}: python {t_py:.2f} s, cython {t_c:.2f} s, speedup {t_py / t_c:.1f}")


if __name__ == "__main__":
    main()
