"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Times each kernel on default-stack shapes, then a full default-scene run
with each backend swapped in. Results are checked for bit equality.
"""
import argparse
import time
import timeit

import numpy as np

from t3s2s import default_scene_path, kernels, load_scene, pipeline


def kernel_cases(rng):
    b, d_h, n, K = 32 * 32, 32, 77, 2
    V = rng.standard_normal((n, d_h))
    Y = kernels.topk_indices(V, K, 16)
    slot = np.full(n, -1, np.int64)
    slot[[7, 9, 11, 14, 15]] = np.arange(5)
    masks = (rng.random((5, b)) < 0.2).astype(np.uint8)
    F = rng.standard_normal((b, d_h))
    H = kernels.characteristics_mask(Y, slot, masks)
    L = rng.standard_normal((16 * 16, n))
    cols = np.array([7, 9, 11, 14, 15])
    m16 = (rng.random((5, 256)) < 0.2).astype(np.uint8)
    coef = np.full(5, 0.8)
    return {
        "topk_indices": lambda be: kernels.topk_indices(V, K, 16, backend=be),
        "characteristics_mask": lambda be: kernels.characteristics_mask(Y, slot, masks, backend=be),
        "prominence": lambda be: kernels.prominence(F, H, 1.0, backend=be),
        "dense_tune": lambda be: kernels.dense_tune(L, cols, m16, coef, backend=be),
    }


def full_run(backend, scene):
    saved = kernels._impl
    kernels._impl = backend
    try:
        start = time.perf_counter()
        report = pipeline.run(scene)
        return time.perf_counter() - start, report.digest
    finally:
        kernels._impl = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args()

    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled backend not built; timing the numpy path only")

    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name in backends) + "   (us/call)")
    for name, fn in cases.items():
        outs = [fn(be) for be in backends.values()]
        assert all(o.tobytes() == outs[0].tobytes() for o in outs), name
        times = [min(timeit.repeat(lambda: fn(be), number=args.number, repeat=args.repeat))
                 / args.number * 1e6 for be in backends.values()]
        print(f"{name:<22}" + "".join(f"{t:>14.1f}" for t in times))

    scene = load_scene(default_scene_path())
    digests = set()
    for name, be in backends.items():
        best = min(full_run(be, scene)[0] for _ in range(args.repeat))
        digests.add(full_run(be, scene)[1])
        print(f"default run [{name}]: {best:.3f} s")
    assert len(digests) == 1, "backends disagree on the run digest"


if __name__ == "__main__":
    main()
