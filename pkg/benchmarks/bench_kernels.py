"""Compare the numba and numpy backends of the raster kernels.

    python benchmarks/bench_kernels.py [--repeat 20] [--scale 1 2]

Both backends are checked for identical output before timing.  The first
numba call (JIT compile) is reported separately.
"""

import argparse
import time

import numpy as np

from depthaudit import kernels
from depthaudit.verification import RAMP


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def remap_case(h, w, rng):
    src = rng.uniform(0.2, 3.0, (h, w))
    src[rng.random(src.shape) < 0.01] = np.nan
    jj, ii = np.mgrid[0:h, 0:w].astype(np.float64)
    z = 0.95074
    mx = ii + (ii - w / 2) * (1 / z - 1)
    my = jj + (jj - h / 2) * (1 / z - 1)
    return (src, mx, my)


def blend_case(h, w, rng):
    rgb = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    depth = rng.uniform(0.2, 2.0, (h, w))
    depth[rng.random(depth.shape) < 0.05] = np.nan
    return (rgb, depth, 0.5, 5.0, RAMP)


CASES = {
    "remap_bilinear": (remap_case, kernels.remap_bilinear_numpy, kernels.remap_bilinear_numba),
    "blend_overlay": (blend_case, kernels.blend_overlay_numpy, kernels.blend_overlay_numba),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--scale", type=int, nargs="+", default=[1, 2, 3])
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'size':>11}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}{'jit s':>8}")
    for name, (make, np_fn, nb_fn) in CASES.items():
        for s in args.scale:
            h, w = 480 * s, 640 * s
            case = make(h, w, rng)
            t0 = time.perf_counter()
            got = nb_fn(*case)
            jit = time.perf_counter() - t0
            if not np.array_equal(np_fn(*case), got, equal_nan=True):
                raise SystemExit(f"{name}: backends disagree")
            t_np = best_of(lambda: np_fn(*case), args.repeat)
            t_nb = best_of(lambda: nb_fn(*case), args.repeat)
            print(f"{name:<16}{f'{w}x{h}':>11}{t_np * 1e3:>11.2f}{t_nb * 1e3:>11.2f}{t_np / t_nb:>8.1f}x{jit:>8.2f}")


if __name__ == "__main__":
    main()
