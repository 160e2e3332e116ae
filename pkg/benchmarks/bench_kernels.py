"""Time the compiled kernel against the pure-Python loops.

    python benchmarks/bench_kernels.py [--repeat N] [--seconds T]

Both backends run the same synthetic trial; results are checked to be
identical before timings are reported.
"""

import argparse
import timeit

from mox_frontend import default_config, default_sensor_params
from mox_frontend.frontend import BACKENDS, run_array, run_single_sensor
from mox_frontend.signal_model import Stimulus, synthesize_trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seconds", type=float, default=11.0, help="trace length")
    args = ap.parse_args(argv)

    cfg = default_config()
    stim = Stimulus("EB", 3)
    traces = [synthesize_trace(p, stim, cfg.dt_s, -1.0, args.seconds - 1.0, seed=1)
              for p in default_sensor_params()]
    n = len(traces[0])
    print(f"{n} samples per sensor, backends available: {', '.join(BACKENDS)}")

    if "cython" in BACKENDS:
        for fn, arg in ((run_array, traces), (run_single_sensor, traces[0])):
            assert fn(arg, cfg, backend="cython") == fn(arg, cfg, backend="python")

    best = {}
    for backend in BACKENDS:
        for label, fn, arg in (("array", run_array, traces), ("single", run_single_sensor, traces[0])):
            number = 1 if backend == "python" else 20
            t = min(timeit.repeat(lambda: fn(arg, cfg, backend=backend), number=number, repeat=args.repeat))
            best[(backend, label)] = t / number
            print(f"{backend:>7} {label:>6}: {t / number * 1e3:9.3f} ms/trial")
    if "cython" in BACKENDS:
        for label in ("array", "single"):
            print(f"speed-up {label}: {best[('python', label)] / best[('cython', label)]:.0f}x")


if __name__ == "__main__":
    main()
