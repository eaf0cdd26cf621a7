"""Time the numba kernels against the pure-numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--rows 584] [--cols 565] [--repeat 5] [--solver]

Each kernel is called once per backend before timing so numba compilation
is excluded. With ``--solver`` a full smoothing run on the vessel phantom is
also timed in a subprocess per backend, selected through
``AITVSEG_DISABLE_NUMBA``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from aitvseg import kernels
from aitvseg.degrade import derive_key

_SOLVER_SNIPPET = """
import time
import numpy as np
from aitvseg import kernels
from aitvseg.phantoms import drive_phantom
from aitvseg.solver import AdmmConfig, admm_smooth
from aitvseg.spectral import gaussian_kernel
img = drive_phantom(seed=0)[0] * 100.0
f = np.random.default_rng(0).poisson(img).astype(float)
cfg = AdmmConfig(lam=1.5, mu=0.05, alpha=0.6, max_iter={iters}, eps=1e-12)
admm_smooth(f[:32, :32], gaussian_kernel(3, 3, 1.0), cfg)
t = time.perf_counter()
admm_smooth(f, gaussian_kernel(3, 3, 1.0), cfg)
print(kernels.BACKEND_NAME, time.perf_counter() - t)
"""


def _cases(rows, cols, points, rng):
    xx, xy = rng.normal(size=(2, rows, cols))
    mean = rng.uniform(0.0, 60.0, size=rows * cols)
    pts = rng.normal(size=(points, 6))
    cents = rng.normal(size=(6, 6))
    key = derive_key(0, 0)
    return {
        "prox_aitv_field": lambda b: b.prox_aitv_field(xx, xy, 0.6, 0.8),
        "prox_iso_field": lambda b: b.prox_iso_field(xx, xy, 0.8),
        "poisson_counts": lambda b: b.poisson_counts(mean, key),
        "nearest_centroid": lambda b: b.nearest_centroid(pts, cents),
    }


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(rows, cols, points, repeat, seed=0):
    """Return ``[(name, numpy_sec, numba_sec)]`` for each hot kernel."""
    if kernels.numba_backend is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rows_out = []
    for name, call in _cases(rows, cols, points, np.random.default_rng(seed)).items():
        call(kernels.numba_backend)
        t_np = _best(lambda: call(kernels.numpy_backend), repeat)
        t_nb = _best(lambda: call(kernels.numba_backend), repeat)
        rows_out.append((name, t_np, t_nb))
    return rows_out


def bench_solver(iters):
    """Time one full smoothing run per backend, each in a fresh interpreter."""
    out = []
    for disable in ("1", "0"):
        env = dict(os.environ, AITVSEG_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", _SOLVER_SNIPPET.format(iters=iters)], env=env,
                             capture_output=True, text=True, check=True)
        name, sec = res.stdout.split()
        out.append((name, float(sec)))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=584)
    p.add_argument("--cols", type=int, default=565)
    p.add_argument("--points", type=int, default=187500, help="feature rows for nearest_centroid")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--solver", action="store_true", help="also time a full smoothing run per backend")
    p.add_argument("--solver-iters", type=int, default=40)
    args = p.parse_args(argv)

    print(f"grid {args.rows}x{args.cols}, {args.points} points, best of {args.repeat}")
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, t_np, t_nb in bench_kernels(args.rows, args.cols, args.points, args.repeat):
        print(f"{name:<18} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>7.1f}x")
    if args.solver:
        print(f"\nfull smoothing run, {args.solver_iters} iterations")
        for name, sec in bench_solver(args.solver_iters):
            print(f"{name:<18} {sec:>10.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
