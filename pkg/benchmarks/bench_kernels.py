"""Compare the compiled attention kernels against the numpy reference.

Usage:
    python benchmarks/bench_kernels.py [--repeat 50]

Shapes mirror the sublayers of a toy-profile forward pass (B keysets,
Q query slots sharing a keyset, H heads, Dh per-head width, S padded keys).
"""

import argparse
import time

import numpy as np

from hpnet import kernels
from hpnet.kernels import reference

CASES = (
    ("lane graph", dict(b=120, q=1, h=2, dh=16, s=8)),
    ("spatial", dict(b=120, q=6, h=2, dh=16, s=64)),
    ("temporal", dict(b=120, q=6, h=2, dh=16, s=11)),
    ("agent", dict(b=720, q=1, h=2, dh=16, s=5)),
    ("history", dict(b=720, q=1, h=2, dh=16, s=11)),
    ("mode", dict(b=120, q=6, h=2, dh=16, s=6)),
)


def make(rng, b, q, h, dh, s):
    return (
        rng.standard_normal((b, q, h, dh)),
        rng.standard_normal((b, s, h, dh)),
        rng.standard_normal((b, s, h, dh)),
        rng.random((b, s)) < 0.85,
    )


def timeit(fn, repeat):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat * 1e3


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    if kernels.BACKEND == "numpy":
        print("compiled backend unavailable; benchmarking reference only")
    impls = {"native": kernels, "numpy": reference}
    if kernels.BACKEND != "native":
        impls.pop("native")

    print(f"{'case':<12} {'pass':<8} " + " ".join(f"{k:>10}" for k in impls)
          + ("   speedup" if len(impls) == 2 else ""))
    for name, dims in CASES:
        q, k, v, mask = make(rng, **dims)
        scale = 1.0 / np.sqrt(dims["dh"])
        _, probs = reference.sdpa_forward(q, k, v, mask, scale, allow_empty=True)
        g = rng.standard_normal(q.shape)
        for label, fns in (
            ("forward", {lbl: (lambda im=im: im.sdpa_forward(
                q, k, v, mask, scale, allow_empty=True)) for lbl, im in impls.items()}),
            ("backward", {lbl: (lambda im=im: im.sdpa_backward(
                g, probs, q, k, v, scale)) for lbl, im in impls.items()}),
        ):
            times = {lbl: timeit(fn, args.repeat) for lbl, fn in fns.items()}
            row = f"{name:<12} {label:<8} " + " ".join(
                f"{times[lbl]:>8.3f}ms" for lbl in impls)
            if len(times) == 2:
                row += f"   {times['numpy'] / times['native']:>6.1f}x"
            print(row)

    grad = rng.standard_normal((6400, 32))
    idx = rng.integers(0, 700, size=6400)
    times = {lbl: timeit(lambda im=im: im.scatter_add_rows(grad, idx, 700),
                         args.repeat) for lbl, im in impls.items()}
    row = f"{'scatter':<12} {'rows':<8} " + " ".join(
        f"{times[lbl]:>8.3f}ms" for lbl in impls)
    if len(times) == 2:
        row += f"   {times['numpy'] / times['native']:>6.1f}x"
    print(row)


if __name__ == "__main__":
    main()
