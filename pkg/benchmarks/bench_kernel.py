"""Time the compiled RK4 kernel against the numpy fallback.

    python3 benchmarks/bench_kernel.py --samples 20000 --steps 500 --repeat 3

Both kernels integrate the same equilibrium states with alternating kappa
signs; the script reports the best wall time of each and the largest
endpoint difference between them.
"""
import argparse
import time

import numpy as np

from kappaqkd import _kernel_py
from kappaqkd.dynamics import IntegratorConfig, PhysicalParams
from kappaqkd.sampling import SeedSpec, sample_equilibrium_array

try:
    from kappaqkd import _kernel
except ImportError:
    _kernel = None


def best_time(fn, args, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--kappa", type=float, default=100.0, help="magnitude; signs alternate")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    params = PhysicalParams()
    cfg = IntegratorConfig(n_steps=args.steps)
    z = sample_equilibrium_array(args.samples, params, SeedSpec(0))
    kap = np.where(np.arange(args.samples) % 2, args.kappa, -args.kappa)
    call = (np.ascontiguousarray(z[:, 0]), np.ascontiguousarray(z[:, 1]), kap, *params.kernel_coefficients(),
            cfg.t_end, cfg.n_steps, cfg.window_start)

    work = args.samples * args.steps
    t_py, out_py = best_time(_kernel_py.rk4_batch, call, args.repeat)
    print(f"numpy   {t_py:8.3f} s   {work / t_py / 1e6:7.2f} M pair-steps/s")
    if _kernel is None:
        print("cython  not built (install without KAPPAQKD_NO_EXT to compile it)")
        return
    t_cy, out_cy = best_time(_kernel.rk4_batch, call, args.repeat)
    diff = max(np.max(np.abs(out_cy[0] - out_py[0])), np.max(np.abs(out_cy[1] - out_py[1])))
    print(f"cython  {t_cy:8.3f} s   {work / t_cy / 1e6:7.2f} M pair-steps/s")
    print(f"speedup {t_py / t_cy:8.2f}x  max endpoint difference {diff:.1e}")


if __name__ == "__main__":
    main()
