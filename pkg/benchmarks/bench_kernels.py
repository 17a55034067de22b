"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--N 200] [--steps 200] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from sphereflow import dynamics as dy
from sphereflow._backend import get_kernels
from sphereflow.model import ModelParams


def _setup(N):
    p = ModelParams()
    s = dy.init_state(dy.SimConfig(params=p, N=N, initial_data=dy.InitialData(amp=1e-2)))
    return p, s, dy.pack_params(p)


def bench(kernels, N, steps, repeat):
    p, s, pars = _setup(N)
    drho, du, dr = np.empty(N + 1), np.empty(N + 2), np.empty(N + 2)

    def rhs():
        kernels.scheme_rhs(pars, s.h, 0.0, s.rho, s.u.copy(), s.r, drho, du, dr)

    def advance():
        rho, u, r = s.rho.copy(), s.u.copy(), s.r.copy()
        kernels.advance(pars, s.h, rho, u, r, 0.0, 1e300, 0.25, 20, steps, np.zeros(2))

    n_rhs = 2000
    t_rhs = min(timeit.repeat(rhs, number=n_rhs, repeat=repeat)) / n_rhs
    t_adv = min(timeit.repeat(advance, number=1, repeat=repeat)) / steps
    return t_rhs, t_adv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=200)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    results = {}
    for name in ("python", "compiled"):
        try:
            kernels = get_kernels(name)
        except ImportError:
            print(f"{name:<9} unavailable")
            continue
        results[name] = bench(kernels, args.N, args.steps, args.repeat)
        t_rhs, t_adv = results[name]
        print(f"{name:<9} rhs {t_rhs * 1e6:9.1f} us   RK4 step {t_adv * 1e6:9.1f} us   (N={args.N})")
    if len(results) == 2:
        py, c = results["python"], results["compiled"]
        print(f"speedup   rhs {py[0] / c[0]:8.1f}x     RK4 step {py[1] / c[1]:8.1f}x")


if __name__ == "__main__":
    main()
