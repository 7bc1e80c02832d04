"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--frames 1000] [--objects 52] [--repeat 3]

Prints one row per kernel with the best-of-``repeat`` time for each backend
and the speedup, then end-to-end tracker throughput on a synthetic platoon
sequence.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fasttracker import kernels
from fasttracker.synth import default_spec, generate
from fasttracker.tracker import run_sequence


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_cases(rng):
    a = np.column_stack([rng.uniform(0, 1800, (60, 2)), rng.uniform(10, 120, (60, 2))])
    b = np.column_stack([rng.uniform(0, 1800, (60, 2)), rng.uniform(10, 120, (60, 2))])
    cost = rng.random((60, 60))
    mean = rng.normal(0, 50, 8)
    cov = np.eye(8) * 4.0
    q = np.full(8, 0.5)
    z = rng.normal(0, 50, 4)

    def iou():
        for _ in range(200):
            kernels.iou_matrix(a, b)

    def cov_():
        for _ in range(200):
            kernels.coverage_matrix(a, b)

    def lap():
        for _ in range(200):
            kernels.linear_assignment(cost)

    def kalman():
        for _ in range(5000):
            m, p = kernels.kalman_predict(mean, cov, q)
            kernels.kalman_update(m, p, z, 1.0)

    return [("iou_matrix 60x60 x200", iou), ("coverage_matrix 60x60 x200", cov_),
            ("linear_assignment 60x60 x200", lap), ("kalman predict+update x5000", kalman)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--objects", type=int, default=52)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the Python backend is available")
    original = kernels.BACKEND
    rng = np.random.default_rng(0)
    cases = _kernel_cases(rng)

    print(f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, fn in cases:
        times = {}
        for b in backends:
            kernels.set_backend(b)
            times[b] = _best(fn, args.repeat)
        speed = times["python"] / times["compiled"] if len(times) == 2 else float("nan")
        print(f"{name:32s}" + "".join(f"{times[b] * 1e3:10.1f}ms" for b in backends) + f"{speed:9.1f}x")

    scn = generate(default_spec("platoon", 0, n_objects=args.objects, n_frames=args.frames))
    stream = scn.detections_by_frame()
    per_frame = len(scn.detections) / args.frames
    print(f"\ntracker, {args.frames} frames at {per_frame:.1f} detections/frame")
    for use_map in (False, True):
        env = scn.env_map if use_map else None
        row = []
        for b in backends:
            kernels.set_backend(b)
            t = _best(lambda: run_sequence(stream, env, n_frames=args.frames), 1)
            row.append(f"{b} {args.frames / t:7.1f} fps")
        print(f"  map {'on ' if use_map else 'off'}: " + ", ".join(row))
    kernels.set_backend(original)


if __name__ == "__main__":
    main()
