"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--table]

``--table`` also times a full threshold-table build under each backend in
a fresh interpreter (the Python build takes a minute or more).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from idbs import _kernels, _pykernels, posterior

F_POINTS = [(x, y) for x in (0.1, 5.0, 50.0, 500.0, 2000.0) for y in (0.5, 20.0, 400.0, 1900.0)]
CV_POINTS = [(a, x) for a in (0.9, 0.99) for x in (10.0, 100.0, 1000.0)]


def phase_inputs(n_cases=50, n_beams=32, budget=1024, seed=0):
    """Random single-path phases at a low SNR, as (compiled args, python args)."""
    table = posterior.get_table(0.97, 4096.0, 1024)
    grid, tau, tail = table.kernel_args()
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n_cases):
        h = np.full(n_beams, 0.05 + 0j)
        h[rng.integers(n_beams)] = 1.0
        z = rng.standard_normal((budget, 2))
        scale = 4.0
        common = (1, budget, scale, 1.0 / scale ** 2)
        flags = (True, True, -1, False)
        c = (np.ascontiguousarray(h.real), np.ascontiguousarray(h.imag),
             np.ascontiguousarray(z[:, 0]), np.ascontiguousarray(z[:, 1]),
             *common, grid, tau, tail, *flags)
        p = (h.real.tolist(), h.imag.tolist(), z[:, 0].tolist(), z[:, 1].tolist(),
             *common, list(grid), list(tau), tail, *flags)
        cases.append((c, p))
    return cases


def bench(mod, cases, repeat):
    results = {}
    results["f_series (20 points)"] = min(timeit.repeat(
        lambda: [mod.f_series_kernel(x, y, 1e-12, 100_000) for x, y in F_POINTS],
        number=1, repeat=repeat))
    results["critical_value (6 points)"] = min(timeit.repeat(
        lambda: [mod.critical_value_kernel(a, x, 1e-12, 1e-9, 100_000) for a, x in CV_POINTS],
        number=1, repeat=repeat))
    idx = 0 if mod is not _pykernels else 1
    results[f"run_phase ({len(cases)} phases)"] = min(timeit.repeat(
        lambda: [mod.run_phase_kernel(*case[idx]) for case in cases],
        number=1, repeat=repeat))
    return results


def table_build_time(pure):
    env = dict(os.environ, IDBS_PURE_PYTHON="1" if pure else "0")
    code = ("import time, idbs.posterior as p; t=time.perf_counter(); "
            "p.build_table(0.97, 4096.0, 1024); print(time.perf_counter()-t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--table", action="store_true")
    args = ap.parse_args(argv)

    backends = _kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python fallback is available")
    cases = phase_inputs()
    timings = {name: bench(mod, cases, args.repeat) for name, mod in backends.items()}
    if args.table:
        timings.setdefault("python", {})["table build"] = table_build_time(True)
        if "cython" in timings:
            timings["cython"]["table build"] = table_build_time(False)

    print(f"{'kernel':28s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for key in timings["python"]:
        py = timings["python"][key]
        cy = timings.get("cython", {}).get(key)
        cy_s = f"{cy:12.4f}" if cy is not None else f"{'-':>12s}"
        sp = f"{py / cy:8.1f}x" if cy else f"{'-':>9s}"
        print(f"{key:28s} {py:12.4f} {cy_s} {sp}")


if __name__ == "__main__":
    main()
