"""Benchmark the semi-Lagrangian sweep: compiled kernel vs numpy fallback.

The sweep dominates coupled-run wall time (one full phase-space gather per
quadrature node per iteration), so this is the number that matters when
deciding whether the compiled path is worth the JIT warm-up on a given host.

Usage:
    python3 benchmarks/bench_kernels.py [--n-x 32] [--n-v 33] [--repeats 5]

Setting NSV_NUMBA=0 in the environment disables the compiled path inside the
package; this script imports both implementations directly, so it reports the
comparison regardless of the flag (and degrades to numpy-only when numba is
not importable).
"""

import argparse
import math
import time

import numpy as np

from nsvsim import kernels
from nsvsim.interp import pad_phase, prefilter_periodic, prefilter_phase
from nsvsim.spectral import SpectralGrid, taylor_green
from nsvsim.vlasov import PhaseGrid


# Reference Maxwellian removed by the sweep at each foot; fixed here so both
# paths run the same workload the solver gives them.
ENV = (0.0, 0.0, 0.25)


def build_workload(n_x: int, n_v: int, v_max: float, dt: float, nsub: int):
    grid = PhaseGrid(SpectralGrid(n_x), n_v=n_v, v_max=v_max)
    rng = np.random.default_rng(42)
    f = rng.uniform(0.0, 1.0, grid.shape)
    taper = np.hanning(n_v + 2)[1:-1]
    f *= taper[None, None, :, None] * taper[None, None, None, :]

    c1, c2, inv2s2 = ENV
    e = ((grid.v[:, None] - c1) ** 2 + (grid.v[None, :] - c2) ** 2) * inv2s2
    weight = np.exp(np.minimum(e, kernels.ENVELOPE_EXP_MAX))
    cf = prefilter_phase(f * weight[None, None, :, :])
    fpad = pad_phase(f)
    stage = prefilter_periodic(taylor_green(0.0, grid.space).values)
    cu = np.repeat(stage[None], 2 * nsub + 1, axis=0)
    growth = math.exp(2.0 * dt)
    return grid, (cf, fpad, cu, grid.space.dx, grid.dv, v_max, dt, nsub, growth, *ENV)


def time_call(fn, args, repeats: int) -> tuple[float, np.ndarray]:
    best = math.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-x", type=int, default=32, help="spatial nodes per axis")
    parser.add_argument("--n-v", type=int, default=33, help="velocity nodes per axis")
    parser.add_argument("--v-max", type=float, default=6.0)
    parser.add_argument("--dt", type=float, default=0.01)
    parser.add_argument("--nsub", type=int, default=2, help="characteristic substeps")
    parser.add_argument("--repeats", type=int, default=5, help="timed repeats (best is kept)")
    args = parser.parse_args()

    grid, call_args = build_workload(args.n_x, args.n_v, args.v_max, args.dt, args.nsub)
    cells = args.n_x * args.n_x * args.n_v * args.n_v
    print(f"phase grid {args.n_x}^2 x {args.n_v}^2 = {cells:,} cells, "
          f"{args.nsub} substeps, best of {args.repeats}")

    t_numpy, out_numpy = time_call(kernels.sweep_numpy, call_args, args.repeats)
    print(f"numpy fallback : {t_numpy * 1e3:9.2f} ms  ({cells / t_numpy / 1e6:7.1f} Mcells/s)")

    if not kernels.NUMBA_ENABLED:
        print("compiled path  : unavailable (numba missing or NSV_NUMBA disabled)")
        return

    t0 = time.perf_counter()
    kernels.sweep_numba(*call_args)  # first call pays the JIT compile
    compile_s = time.perf_counter() - t0
    t_numba, out_numba = time_call(kernels.sweep_numba, call_args, args.repeats)
    print(f"compiled kernel: {t_numba * 1e3:9.2f} ms  ({cells / t_numba / 1e6:7.1f} Mcells/s), "
          f"JIT warm-up {compile_s:.1f} s")
    print(f"speedup        : {t_numpy / t_numba:9.2f}x")

    gap = np.max(np.abs(out_numpy - out_numba))
    scale = np.max(np.abs(out_numpy))
    print(f"agreement      : max |diff| = {gap:.3e} (field scale {scale:.3e})")
    if gap > 1e-12 * scale:
        raise SystemExit("paths disagree beyond round-off")


if __name__ == "__main__":
    main()
