#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on representative inputs with both backends and
prints a timing table plus an end-to-end record synthesis rate. The two
backends produce byte-identical output (asserted here as well), so
LOGOSYNTH_BACKEND only ever trades speed.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""
import argparse
import time

import numpy as np

from logosynth import geometry as g
from logosynth import synth
from logosynth.exemplar import Exemplar
from logosynth.kernels import jit, plain


def timeit(fn, repeats):
    fn()  # warm-up (jit compilation, caches)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def build_inputs():
    rng = np.random.default_rng(7)
    logo = np.zeros((200, 200, 4), dtype=np.uint8)
    logo[20:180, 20:180, :3] = rng.integers(0, 255, 3)
    logo[20:180, 20:180, 3] = 255
    ctx = rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)
    spec = g.TransformSpec(sx=1.2, sy=0.8, kx=0.2, ky=-0.1, theta=37.0)
    inv = np.ascontiguousarray(g.compose(spec).inverse().m)
    return logo, ctx, inv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    logo, ctx, inv = build_inputs()
    cases = [
        ("warp_bilinear 200->320px", lambda m: m.warp_bilinear(logo, inv, 320, 320)),
        ("warp_nearest  200->320px", lambda m: m.warp_nearest(logo, inv, 320, 320)),
        ("colour_transform 200px", lambda m: m.colour_transform(logo, 1.4, 100)),
        ("composite_over 512px ctx", lambda m: m.composite_over(ctx, logo, 100, 100)),
        ("alpha_bbox 200px", lambda m: m.alpha_bbox(logo[:, :, 3], 0)),
    ]

    print(f"{'kernel':<28}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    print("-" * 57)
    for name, call in cases:
        out_jit = call(jit)
        out_plain = call(plain)
        assert np.array_equal(out_jit, out_plain), f"{name}: backends disagree"
        t_jit = timeit(lambda: call(jit), args.repeats)
        t_plain = timeit(lambda: call(plain), args.repeats)
        print(f"{name:<28}{t_jit:>10.3f}{t_plain:>10.3f}{t_plain / t_jit:>8.1f}x")

    # end-to-end: one record through the full pipeline (current backend)
    ex = Exemplar("bench", 0, logo, (20, 20, 179, 179))
    cfg = synth.SynthConfig(images_per_class=1, context_mode="clean_black",
                            clean_canvas_size=512, master_seed=1)
    n = max(20, args.repeats)
    synth.generate_record(ex, None, cfg, 0)
    t0 = time.perf_counter()
    for s in range(n):
        synth.generate_record(ex, None, cfg, s)
    rate = n / (time.perf_counter() - t0)
    from logosynth.kernels import BACKEND

    print(f"\ngenerate_record ({BACKEND} backend): {rate:.0f} records/s "
          f"({1000 / rate:.1f} ms each, 512px clean canvas)")


if __name__ == "__main__":
    main()
