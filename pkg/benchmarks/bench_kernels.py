"""Compare the compiled and numpy field kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times raw batched field evaluation at several batch sizes, then the
single-point-heavy workloads (minimum search, a short transport ramp)
that motivated the compiled core.
"""
import argparse
import importlib
import time

import numpy as np

from scatomchip import _kernels_py, kernels
from scatomchip.constants import MU_0, SINGULAR_GUARD
from scatomchip.magnetostatics import CurrentLoop, z_trap_geometry


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_batches(repeat):
    g = z_trap_geometry().with_loops(CurrentLoop((0, 0, 4.8e-4), 5e-6, current=7e-5))
    rng = np.random.default_rng(0)
    mods = {"python": _kernels_py}
    try:
        mods["cython"] = importlib.import_module("scatomchip._kernels")
    except ImportError:
        print("compiled extension not built; only the numpy backend is timed")
    print(f"{'points':>8} " + " ".join(f"{k:>12}" for k in mods) + "   speedup")
    for n in (1, 19, 1000, 100_000):
        pts = np.ascontiguousarray(rng.normal(0, 2e-5, (n, 3)) + [0, 0, 4.9e-4])
        out = np.empty_like(pts)
        info = np.zeros(3, dtype=np.int_)
        reps = max(repeat, 2000 // n)
        res = {}
        for name, mod in mods.items():
            def call(mod=mod):
                for _ in range(reps):
                    mod.field_points(pts, g._seg_arr, g._loop_arr, g._bias_arr,
                                     SINGULAR_GUARD, MU_0, out, info)
            res[name] = _best(call, repeat) / reps
        line = f"{n:>8} " + " ".join(f"{res[k] * 1e6:>10.1f}us" for k in mods)
        if len(res) == 2:
            line += f"   {res['python'] / res['cython']:.1f}x"
        print(line)


def bench_workloads(repeat):
    # imported lazily so each run picks up the backend patched into kernels
    from scatomchip import condensate, entangler, fluxloop, trap
    g = z_trap_geometry(bias_z=fluxloop.half_flux_bias(5e-6))
    z = trap.find_minimum(g).minimum[2]
    fls = fluxloop.flux_state(CurrentLoop((0, 0, z - 1e-5), 5e-6), g)
    ramp = entangler.RampSchedule(steps=64)
    spec = condensate.CondensateSpec(N=1000)
    return {
        "find_minimum": _best(lambda: trap.find_minimum(g), repeat),
        "ramp(64 steps)": _best(lambda: entangler.run_protocol(g, fls, spec, ramp), max(1, repeat // 2)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    bench_batches(args.repeat)
    results = {}
    saved = kernels.field_points
    for name in ("cython", "python"):
        if name == "cython" and kernels.BACKEND != "cython":
            continue
        kernels.field_points = saved if name == "cython" else _kernels_py.field_points
        results[name] = bench_workloads(args.repeat)
    kernels.field_points = saved
    for task in results["python"]:
        line = f"{task:>16}: " + "  ".join(f"{k} {v[task] * 1e3:8.1f} ms" for k, v in results.items())
        if len(results) == 2:
            line += f"  ({results['python'][task] / results['cython'][task]:.1f}x)"
        print(line)


if __name__ == "__main__":
    import warnings
    warnings.simplefilter("ignore")
    main()
