"""Compare the compiled and pure-Python jet kernels.

Usage: python benchmarks/bench_jets.py [--repeat N]
"""

import argparse
import time

import numpy as np

from sprayholonomy.ad import Jet, compiled_kernels, get_layout, python_kernels, set_kernels
from sprayholonomy.ad.jet import jet_sqrt
from sprayholonomy.analysis import run_analysis
from sprayholonomy.examples import example_config


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def jet_workload(nvars, order, rng):
    lay = get_layout(nvars, order)
    a = Jet(lay, rng.standard_normal(lay.size), order)
    b = Jet(lay, rng.standard_normal(lay.size) + 0.0, order)
    b.coeffs[0] = 3.0
    a.coeffs[0] = 2.0

    def run():
        for _ in range(50):
            c = a * b
            c = c / b
            jet_sqrt(c)

    return lay.size, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    compiled = compiled_kernels()
    backends = [("python", python_kernels)]
    if compiled is None:
        print("compiled kernels not built; reporting the Python backend only")
    else:
        backends.insert(0, ("compiled", compiled))

    rng = np.random.default_rng(0)
    print(f"{'workload':<44} " + " ".join(f"{name:>10}" for name, _ in backends) + "   speedup")
    cases = [(4, 2), (4, 4), (4, 6), (4, 8)]
    for nvars, order in cases:
        size, run = jet_workload(nvars, order, rng)
        ts = []
        for _, k in backends:
            set_kernels(k)
            ts.append(_best(run, args.repeat))
        label = f"mul/div/sqrt x50, {nvars} vars, order {order} ({size})"
        speed = f"{ts[-1] / ts[0]:8.1f}x" if len(ts) == 2 else ""
        print(f"{label:<44} " + " ".join(f"{t:9.4f}s" for t in ts) + "  " + speed)

    for k_id in (1, 3):
        cfg = example_config(k_id)
        ts = []
        for _, k in backends:
            set_kernels(k)
            ts.append(_best(lambda: run_analysis(cfg, run_transport=False), args.repeat))
        label = f"full analysis, example {k_id}"
        speed = f"{ts[-1] / ts[0]:8.1f}x" if len(ts) == 2 else ""
        print(f"{label:<44} " + " ".join(f"{t:9.4f}s" for t in ts) + "  " + speed)
    set_kernels(backends[0][1])


if __name__ == "__main__":
    main()
