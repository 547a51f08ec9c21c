#!/usr/bin/env python3
"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--full-run]

Each kernel is checked for agreement between backends before it is timed.
``--full-run`` also times a short end-to-end simulation under each backend.
"""
import argparse
import statistics
import time

import numpy as np

from datesso import kernels
from datesso.forecast import frac_weights


def _time(fn, repeat):
    samples = []
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - tic)
    return statistics.median(samples)


def cases(rng):
    x = rng.standard_normal(4800)
    w = frac_weights(0.3, 1000)
    y = kernels._kernels_py.frac_filter(x, w)
    lat = rng.uniform(0.05, 0.5, 10)
    req = rng.integers(20, 200, 10).astype(np.float64)
    load = rng.uniform(10, 200, 5)
    util = rng.uniform(0, 1, (10, 5))
    ln = util.copy()
    pr = rng.uniform(0, 1, 10)
    return {
        "frac_filter": (lambda k: k.frac_filter(x, w), 20),
        "frac_unfilter": (lambda k: k.frac_unfilter(y, w), 5),
        "arma_residuals": (lambda k: k.arma_residuals(x, np.array([0.5, -0.2]), np.array([0.3])), 200),
        "evaluate_candidates": (lambda k: k.evaluate_candidates(lat, req, load, 0.09, 0.8), 5000),
        "window_scores": (lambda k: k.window_scores(util, ln, 5, pr, 0.9, 1.0, True), 5000),
    }


def agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(p, q, rtol=1e-9, atol=1e-9) for p, q in zip(a, b))


def bench_kernels(repeat):
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':22s}" + "".join(f"{b:>14s}" for b in backends) + "   speedup")
    for name, (call, loops) in cases(rng).items():
        timings = {}
        outputs = {}
        for b in backends:
            kernels.use_backend(b)
            outputs[b] = call(kernels)
            timings[b] = _time(lambda: [call(kernels) for _ in range(loops)], repeat) / loops
        ok = len(backends) < 2 or agree(outputs["compiled"], outputs["python"])
        row = f"{name:22s}" + "".join(f"{timings[b] * 1e6:12.2f}us" for b in backends)
        if len(backends) == 2:
            row += f"   {timings['python'] / timings['compiled']:6.1f}x"
        print(row + ("" if ok else "   MISMATCH"))
    kernels.use_backend(backends[0])


def bench_run(repeat):
    from datesso import SlaConstraints, generate_synthetic_repository, generate_synthetic_trace
    from datesso.simulator import SimConfig, prepare_forecasts, run

    trace = generate_synthetic_trace(0, 1800, 10)
    sla = SlaConstraints.uniform(10)
    repo = generate_synthetic_repository(0, trace, 10, sla)
    cfg = SimConfig()
    print("\nend-to-end (1800 steps, 10x10, forecasts + datesso and tlhca runs)")
    for b in kernels.available_backends():
        kernels.use_backend(b)

        def once():
            fc, orders = prepare_forecasts(trace, cfg)
            for s in ("datesso", "tlhca"):
                run(s, repo, trace, sla, cfg, fc, orders)

        print(f"  {b:10s} {_time(once, repeat):8.3f}s")
    kernels.use_backend(kernels.available_backends()[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--full-run", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if args.full_run:
        bench_run(max(1, args.repeat // 2))


if __name__ == "__main__":
    main()
