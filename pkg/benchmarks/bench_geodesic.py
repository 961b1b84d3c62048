"""Time geodesic integration with the numba kernels against the pure numpy path.

    python3 benchmarks/bench_geodesic.py --repeat 5 --t-end 1.0
"""
import argparse
import time

import numpy as np

from clairaut._accel import HAVE_NUMBA
from clairaut.geodesic import integrate
from clairaut.lab import sample_geodesic_states
from clairaut.scenarios import get_scenario

SCENARIOS = ("example2", "doubly_warped_default", "doubly_warped_4d", "surface_of_revolution_default")


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench(name, backend, t_end, step, repeat):
    sc = get_scenario(name)
    state = sample_geodesic_states(sc.map, sc.sample_box, np.random.default_rng(42), 1)[0]
    run = lambda: integrate(sc.total, state, state.t + t_end, step, backend=backend)
    trace = run()  # compile and warm caches
    return best_time(run, repeat), trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--step", type=float, default=1e-3)
    ap.add_argument("--scenario", action="append", choices=SCENARIOS)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"{'scenario':<32} {'steps':>6} " + " ".join(f"{b + ' s':>10}" for b in backends) + "   speedup  max|diff|")
    for name in args.scenario or SCENARIOS:
        results = {b: bench(name, b, args.t_end, args.step, args.repeat) for b in backends}
        steps = len(results["numpy"][1]) - 1
        cols = " ".join(f"{results[b][0]:>10.4f}" for b in backends)
        if "numba" in results:
            speedup = results["numpy"][0] / results["numba"][0]
            diff = float(np.max(np.abs(results["numpy"][1].points - results["numba"][1].points)))
            print(f"{name:<32} {steps:>6} {cols}   {speedup:>6.1f}x  {diff:.1e}")
        else:
            print(f"{name:<32} {steps:>6} {cols}   numba unavailable")


if __name__ == "__main__":
    main()
