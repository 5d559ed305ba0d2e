"""Compare the compiled and numpy orthant kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the vectorized bivariate tail (``bvn_upper``) and the QMC orthant
integrator (``genz_integrate``) from both backends on identical inputs and
reports the largest disagreement, then times a full EMV evaluation (d=2,
10-point grid, 45 four-dimensional orthant queries) under each backend in a
subprocess, since the backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vsur import _kernels_py

try:
    from vsur import _ckernels
except ImportError:
    _ckernels = None


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    n = 20_000
    h, k = rng.normal(scale=2, size=(2, n))
    r = rng.uniform(-0.99, 0.99, size=n)
    q = 6
    A = rng.normal(size=(q, q))
    L = np.linalg.cholesky(A @ A.T / q + 0.1 * np.eye(q))
    b = rng.normal(size=q)
    gens = np.sqrt([2.0, 3.0, 5.0, 7.0, 11.0])
    shifts = rng.uniform(size=(8, q - 1))
    return (h, k, r), (L, b, q, gens, shifts, 1024)


_E2E = """
import timeit, numpy as np
from vsur._backend import BACKEND
from vsur.kernels import DomainGrid, MatKernel, MeanFn, NoiseModel, ScalarKernel
from vsur.functionals import UncertaintySpec, emv
from vsur.posterior import GPState, ObservationSet, Threshold, condition
g = DomainGrid.uniform([0.0], [1.0], 10)
k = MatKernel(((np.array([[1.0, 0.4], [0.4, 1.0]]), ScalarKernel("matern-5/2", 0.3, 1.0)),))
prior = GPState(MeanFn.zeros(2), k, NoiseModel.homoscedastic(0.05 * np.eye(2)))
rng = np.random.default_rng(0)
post = condition(prior, ObservationSet(rng.uniform(size=(3, 1)), rng.normal(size=(3, 2))))
spec = UncertaintySpec("emv", g, Threshold((0.0, 0.0)), qmc_samples=8192)
t = min(timeit.repeat(lambda: emv(post, spec), number=1, repeat={repeat}))
print(BACKEND, t, repr(emv(post, spec)))
"""


def end_to_end(repeat):
    rows = []
    for pure in ("1", "0"):
        env = {**os.environ, "VSUR_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", _E2E.format(repeat=repeat)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        rows.append((out[0], float(out[1]), out[2]))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    bvn_args, genz_args = _inputs()
    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the numpy backend only")
    rows = {}
    for name, mod in backends.items():
        t_bvn = min(timeit.repeat(lambda: mod.bvn_upper(*bvn_args), number=1, repeat=args.repeat))
        t_genz = min(timeit.repeat(lambda: mod.genz_integrate(*genz_args), number=1, repeat=args.repeat))
        rows[name] = (t_bvn, t_genz, np.asarray(mod.bvn_upper(*bvn_args)),
                      np.asarray(mod.genz_integrate(*genz_args)))
    print(f"{'backend':<8} {'bvn_upper (20k)':>16} {'genz_integrate (q=6)':>21}")
    for name, (a, b, _, _) in rows.items():
        print(f"{name:<8} {a * 1e3:>13.2f} ms {b * 1e3:>18.2f} ms")
    if "cython" in rows:
        py, cy = rows["python"], rows["cython"]
        print(f"speedup  {py[0] / cy[0]:>15.1f}x {py[1] / cy[1]:>20.1f}x")
        print(f"max |diff|: bvn {np.max(np.abs(py[2] - cy[2])):.1e}, genz {np.max(np.abs(py[3] - cy[3])):.1e}")
    print("\nend to end: emv, d=2, 10-point grid, 8192 QMC samples per query")
    for name, t, val in end_to_end(args.repeat):
        print(f"{name:<8} {t * 1e3:>10.1f} ms   emv={val}")


if __name__ == "__main__":
    main()
