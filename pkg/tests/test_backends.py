"""The numpy fallback must agree with the compiled kernels."""

import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from ptfprg import gf2, kernels

SCRIPT = textwrap.dedent("""
    import sys
    import numpy as np
    from ptfprg import kernels, generator, gf2
    assert kernels.BACKEND == sys.argv[1], kernels.BACKEND
    rng = np.random.default_rng(0)
    cfg = generator.empirical_params(6, 0.25, 5, 2.0 ** -20, 24)
    words = generator.random_words(cfg, rng, 40)
    m = cfg.block_bits
    x0, ha, hb = words[:, 0, 0], words[:, 0, 1::2], words[:, 0, 2::2]
    A = rng.standard_normal((9, 9)); A = A + A.T
    w, V, sweeps = kernels.jacobi_eigh(A, 1e-12, 100)
    T = rng.integers(0, 4, size=(5, 4, 4)); acc = np.array([True, False, True, False])
    blocks = rng.integers(0, 4, size=(50, 5))
    Y = rng.standard_normal((500, 3))
    vi = np.array([[0, 1, 0, 0], [2, 0, 0, 0]]); dg = np.array([[2, 2, 0, 0], [4, 0, 0, 0]])
    s, sq = kernels.hermite_moments(Y, vi, dg)
    np.savez(sys.argv[2],
             expand=kernels.nisan_expand_batch(x0, ha, hb, m, np.uint64(gf2.IRREDUCIBLE_LOW[m])),
             mul=kernels.gf_mul_array(ha[:, 0], hb[:, 0], m, np.uint64(gf2.IRREDUCIBLE_LOW[m])),
             fam=generator.family_batch(cfg, words), comp=generator.sample_batch(cfg, words),
             w=w, V=V, sweeps=sweeps, robp=kernels.robp_run_batch(T, acc, 0, blocks),
             hs=s, hsq=sq)
""")


def run_backend(name, tmp_path):
    out = tmp_path / f"{name}.npz"
    env = {**os.environ, "PTFPRG_BACKEND": name}
    res = subprocess.run([sys.executable, "-c", SCRIPT, name, str(out)], env=env,
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return np.load(out)


def test_backends_agree(tmp_path):
    a = run_backend("numba", tmp_path)
    b = run_backend("numpy", tmp_path)
    for key in ("expand", "mul", "robp"):
        assert np.array_equal(a[key], b[key]), key
    for key in ("fam", "comp", "hs", "hsq"):
        assert np.allclose(a[key], b[key], rtol=1e-14, atol=1e-15), key
    assert np.allclose(a["w"], b["w"], atol=1e-13) and a["sweeps"] == b["sweeps"]


def test_unknown_backend_rejected():
    env = {**os.environ, "PTFPRG_BACKEND": "fortran"}
    res = subprocess.run([sys.executable, "-c", "import ptfprg"], env=env,
                         capture_output=True, text=True)
    assert res.returncode != 0 and "PTFPRG_BACKEND" in res.stderr


def test_thread_cap_accepted():
    env = {**os.environ, "PTFPRG_THREADS": "1"}
    res = subprocess.run([sys.executable, "-c",
                          "import numba, ptfprg.kernels as k; print(k.BACKEND, numba.get_num_threads())"],
                         env=env, capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.split() == ["numba", "1"]


@pytest.mark.parametrize("m", [1, 3, 4, 5, 64])
def test_windowed_expand_matches_bit_loop(m):
    rng = np.random.default_rng(m)
    mask = np.uint64((1 << m) - 1) if m < 64 else np.uint64(2 ** 64 - 1)
    x0 = rng.integers(0, 2 ** 63, 30, dtype=np.uint64) & mask
    ha = rng.integers(0, 2 ** 63, (30, 4), dtype=np.uint64) & mask
    hb = rng.integers(0, 2 ** 63, (30, 4), dtype=np.uint64) & mask
    poly = np.uint64(gf2.IRREDUCIBLE_LOW[m])
    from ptfprg.kernels import _numpy
    assert np.array_equal(kernels.nisan_expand_batch(x0, ha, hb, m, poly),
                          _numpy.nisan_expand_batch(x0, ha, hb, m, poly))
