"""Timing comparison for the jitted and pure-numpy kernel paths.

Runs each hot kernel (binary dilation, exterior distance, bilinear sampling)
through both implementations on the same inputs, checks they agree, and
prints per-op medians plus the speedup. The first jitted call is warmed up
outside the timed region so compilation is not billed to the kernel.

    python3 benchmarks/bench_kernels.py --size 512 --repeats 5
"""

import argparse
import statistics
import time

import numpy as np

from makeuplab import kernels


def timed(fn, *args, repeats):
    fn(*args)  # warmup: jit compile / cache touch
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        samples.append(time.perf_counter() - start)
    return out, statistics.median(samples)


def blob_mask(rng, size, blobs=30):
    yy, xx = np.mgrid[0:size, 0:size]
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(blobs):
        cy, cx = rng.integers(0, size, 2)
        r = rng.integers(size // 32, size // 8)
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return mask


def box_offsets(radius=2):
    span = np.arange(-radius, radius + 1)
    return np.array([(dy, dx) for dy in span for dx in span], dtype=np.int64)


def rotation_coords(size, angle=0.3):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = cx = (size - 1) / 2.0
    c, s = np.cos(angle), np.sin(angle)
    ys = cy + c * (yy - cy) - s * (xx - cx)
    xs = cx + s * (yy - cy) + c * (xx - cx)
    return ys, xs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512 if kernels.USING_NUMBA else 128,
                        help="square grid side (default shrinks when numba is off)")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    mask = blob_mask(rng, args.size)
    offsets = box_offsets()
    image = rng.random((args.size, args.size, 3))
    ys, xs = rotation_coords(args.size)

    cases = [
        ("dilate_binary", kernels._dilate_numba, kernels._dilate_numpy, (mask, offsets)),
        ("exterior_distance", kernels._distance_numba, kernels._distance_numpy, (mask,)),
        ("bilinear_sample", kernels._bilinear_numba, kernels._bilinear_numpy, (image, ys, xs)),
    ]

    if not kernels.USING_NUMBA:
        print("note: numba unavailable or disabled (MAKEUP_NUMBA=0); "
              "the 'jitted' column below is the same loop running un-jitted")
    print(f"grid {args.size}x{args.size}, median of {args.repeats} runs\n")
    print(f"{'kernel':<20} {'jitted':>12} {'numpy':>12} {'speedup':>9}")
    for name, jit_fn, np_fn, inputs in cases:
        out_jit, t_jit = timed(jit_fn, *inputs, repeats=args.repeats)
        out_np, t_np = timed(np_fn, *inputs, repeats=args.repeats)
        if out_jit.dtype.kind in "bi":
            assert np.array_equal(out_jit, out_np), f"{name}: paths disagree"
        else:
            assert np.allclose(out_jit, out_np, atol=1e-12), f"{name}: paths disagree"
        print(f"{name:<20} {t_jit * 1e3:>10.2f}ms {t_np * 1e3:>10.2f}ms {t_np / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
