"""Compare the compiled and pure-numpy convolution kernels.

Times ``im2col``/``col2im`` on shapes typical of the codec and enhancer, then
one codec training step with each backend swapped in. Outputs are checked to
agree before any timing is reported.

    python benchmarks/bench_kernels.py [--repeats 20] [--steps 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from srec import codec
from srec import numkit as nk
from srec.numkit import _pykernels, kernels

try:
    from srec.numkit import _ckernels
except ImportError:
    _ckernels = None

SHAPES = [
    ("codec enc1 (8x3x66x66, s2)", (8, 3, 66, 66), 3, 2),
    ("codec dec (8x64x34x34, s1)", (8, 64, 34, 34), 3, 1),
    ("rdn dense (8x80x34x34, s1)", (8, 80, 34, 34), 3, 1),
]


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_kernels(repeats: int) -> None:
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}{'op':<8}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for label, shape, k, s in SHAPES:
        x = rng.standard_normal(shape).astype(np.float32)
        cols = _pykernels.im2col(x, k, s)
        if _ckernels is not None:
            np.testing.assert_array_equal(cols, _ckernels.im2col(x, k, s))
            np.testing.assert_allclose(_pykernels.col2im(cols, shape, k, s), _ckernels.col2im(cols, shape, k, s),
                                       rtol=1e-5, atol=1e-5)
        for op in ("im2col", "col2im"):
            args = (x, k, s) if op == "im2col" else (cols, shape, k, s)
            t_py = best_of(lambda: getattr(_pykernels, op)(*args), repeats)
            if _ckernels is None:
                print(f"{label:<32}{op:<8}{t_py * 1e3:>10.2f}{'n/a':>11}{'':>9}")
                continue
            t_c = best_of(lambda: getattr(_ckernels, op)(*args), repeats)
            print(f"{label:<32}{op:<8}{t_py * 1e3:>10.2f}{t_c * 1e3:>11.2f}{t_py / t_c:>8.1f}x")


def _use(module) -> None:
    kernels.im2col = module.im2col
    kernels.col2im = module.col2im


def bench_training(steps: int) -> None:
    rng = np.random.default_rng(1)
    images = rng.random((8, 3, 64, 64)).astype(np.float32)
    backends = [("numpy", _pykernels)] + ([("cython", _ckernels)] if _ckernels is not None else [])
    saved = (kernels.im2col, kernels.col2im)
    results = {}
    try:
        for name, module in backends:
            _use(module)
            model = codec.CodecModel(codec.RateConfig(0.2, 64, 64), seed=0)
            cfg = nk.TrainConfig(learning_rate=1e-3, batch_size=8, max_steps=steps)
            codec.train_codec(model, images, cfg)  # warm-up
            t = time.perf_counter()
            res = codec.train_codec(model, images, cfg)
            results[name] = ((time.perf_counter() - t) / steps, res.losses[-1])
    finally:
        kernels.im2col, kernels.col2im = saved
    print()
    for name, (per_step, loss) in results.items():
        print(f"codec train step, batch 8 @ 64x64, {name:<6}: {per_step * 1e3:8.1f} ms  (last loss {loss:.6f})")
    if len(results) == 2:
        print(f"end-to-end speedup: {results['numpy'][0] / results['cython'][0]:.2f}x")


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--steps", type=int, default=5)
    args = parser.parse_args(argv)
    print(f"active backend at import: {kernels.BACKEND}")
    bench_kernels(args.repeats)
    bench_training(args.steps)


if __name__ == "__main__":
    main()
