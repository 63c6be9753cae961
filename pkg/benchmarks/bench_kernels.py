"""Time every hot kernel under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--samples 20000] [--repeat 3]

The backend is fixed at import, so each one runs in its own subprocess and
reports JSON timings; the parent prints a side-by-side table.  Numba timings
exclude the first (compiling or cache-loading) call.
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, sys, time
    import numpy as np
    from ptfprg import generator, gf2, harness, kernels

    S, repeat = int(sys.argv[1]), int(sys.argv[2])
    rng = np.random.default_rng(0)
    cfg = harness.desk_config()
    words = generator.random_words(cfg, rng, S)
    one = np.ascontiguousarray(words[:, :1, :])
    m = cfg.block_bits
    poly = np.uint64(gf2.IRREDUCIBLE_LOW[m])
    j = rng.integers(0, cfg.N, S * cfg.n, dtype=np.uint64)
    k = rng.integers(0, cfg.N, S * cfg.n, dtype=np.uint64)
    A = rng.standard_normal((64, 64)); A = A + A.T
    _, vi, dg = harness.hermite_indices(16, 4)
    Y = rng.standard_normal((S, 16))
    T = rng.integers(0, 8, size=(32, 8, 4)); acc = rng.random(8) < 0.5
    blocks = rng.integers(0, 4, size=(S * 10, 32))

    cases = {
        "gf_mul_array": lambda: kernels.gf_mul_array(words[:, 0, 1], words[:, 0, 2], m, poly),
        "nisan_expand_batch": lambda: kernels.nisan_expand_batch(
            one[:, 0, 0], one[:, 0, 1::2], one[:, 0, 2::2], m, poly),
        "grid_gaussian_batch": lambda: kernels.grid_gaussian_batch(j, k, np.uint64(cfg.N)),
        "family_batch (1 family)": lambda: generator.family_batch(
            generator.empirical_params(16, 0.25, 1, 2.0 ** -20, 24), one),
        "composed_batch (64 families)": lambda: generator.sample_batch(cfg, words),
        "robp_run_batch": lambda: kernels.robp_run_batch(T, acc, 0, blocks),
        "jacobi_eigh (64x64)": lambda: kernels.jacobi_eigh(A, 1e-12, 100),
        "hermite_moments (4844 idx)": lambda: kernels.hermite_moments(Y, vi, dg),
    }
    out = {}
    for name, fn in cases.items():
        fn()
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    print(json.dumps({"backend": kernels.BACKEND, "timings": out}))
""")


def run(backend, samples, repeat):
    env = {**os.environ, "PTFPRG_BACKEND": backend}
    res = subprocess.run([sys.executable, "-c", WORKER, str(samples), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])["timings"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run("numba", args.samples, args.repeat)
    slow = run("numpy", args.samples, args.repeat)
    print(f"samples={args.samples}, best of {args.repeat}")
    print(f"{'kernel':<30} {'numba s':>10} {'numpy s':>10} {'speedup':>9}")
    for name in fast:
        print(f"{name:<30} {fast[name]:10.4f} {slow[name]:10.4f} {slow[name] / fast[name]:9.1f}x")


if __name__ == "__main__":
    main()
