"""Compare the compiled and numpy convolution/pooling kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--batch B]

Both backends run on identical inputs; outputs are checked for exact
agreement before timing.  The embedder-sized shapes match a training batch
(32 images, 32x32 input, 16 then 32 channels).
"""

import argparse
import timeit

import numpy as np

from shapebias.diffcore import kernels


def cases(batch, rng):
    for c, hw in ((3, 32), (16, 16)):
        x = rng.normal(size=(batch, c, hw, hw))
        cols = kernels.python_backend.im2col3x3(x)
        yield f"im2col3x3 {x.shape}", "im2col3x3", (x,)
        yield f"col2im3x3 {x.shape}", "col2im3x3", (cols, batch, c, hw, hw)
    for c, hw in ((16, 32), (32, 16)):
        x = rng.normal(size=(batch, c, hw, hw))
        out, idx = kernels.python_backend.maxpool2x2(x)
        yield f"maxpool2x2 {x.shape}", "maxpool2x2", (x,)
        yield f"maxpool2x2_backward {x.shape}", "maxpool2x2_backward", (rng.normal(size=out.shape), idx)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--batch", type=int, default=32)
    args = p.parse_args(argv)

    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled kernels not built; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<44}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, fn, fargs in cases(args.batch, rng):
        results = {name: getattr(mod, fn)(*fargs) for name, mod in backends.items()}
        if "cython" in results and not _same(results["python"], results["cython"]):
            raise SystemExit(f"{label}: backends disagree")
        times = {name: min(timeit.repeat(lambda m=mod: getattr(m, fn)(*fargs), number=1, repeat=args.repeat))
                 for name, mod in backends.items()}
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        row = "".join(f"{times[name] * 1e3:>10.2f}ms" for name in backends)
        print(f"{label:<44}{row}{speedup:>9.2f}x")


if __name__ == "__main__":
    main()
