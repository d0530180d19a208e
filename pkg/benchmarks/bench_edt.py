"""Time the squared EDT backends against each other and against scipy.

    python3 benchmarks/bench_edt.py [--repeat 3] [--threads 1,4]

Every backend's output is checked against ``scipy.ndimage`` before timing.
"""

import argparse
import time

import numpy as np
from scipy import ndimage

from reachlab._kernels import available_backends, squared_edt

CASES = {
    "2d-256": (256, 256),
    "2d-1024": (1024, 1024),
    "3d-64": (64, 64, 64),
    "3d-128": (128, 128, 128),
}


def seeds_for(shape, rng):
    # a sphere shell plus scattered points: long and short envelopes both occur
    idx = np.indices(shape).astype(np.float64)
    c = (np.array(shape, float)[:, None] - 1) / 2
    r = np.sqrt(((idx.reshape(len(shape), -1) - c) ** 2).sum(0)).reshape(shape)
    shell = np.abs(r - min(shape) / 3) < 0.5
    return shell | (rng.random(shape) < 1e-4)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", default="1,4")
    ap.add_argument("--cases", default=",".join(CASES))
    ap.add_argument("--python-max-cells", type=int, default=300_000,
                    help="skip the pure-Python backend above this many cells")
    args = ap.parse_args(argv)
    threads = [int(t) for t in args.threads.split(",")]
    rng = np.random.default_rng(0)
    print(f"{'case':10} {'backend':8} {'threads':>7} {'seconds':>9} {'Mcell/s':>8}")
    for name in args.cases.split(","):
        seeds = seeds_for(CASES[name], rng)
        ref = ndimage.distance_transform_edt(~seeds) ** 2
        t = best_of(lambda: ndimage.distance_transform_edt(~seeds), args.repeat)
        print(f"{name:10} {'scipy':8} {1:7d} {t:9.4f} {seeds.size / t / 1e6:8.2f}")
        for backend in available_backends():
            if backend == "python" and seeds.size > args.python_max_cells:
                continue
            for k in threads:
                d2, _ = squared_edt(seeds, backend=backend, threads=k)
                if not np.array_equal(d2, np.rint(ref).astype(d2.dtype)):
                    raise SystemExit(f"{backend} disagrees with scipy on {name}")
                t = best_of(lambda: squared_edt(seeds, backend=backend, threads=k), args.repeat)
                print(f"{name:10} {backend:8} {k:7d} {t:9.4f} {seeds.size / t / 1e6:8.2f}")


if __name__ == "__main__":
    main()
