import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ptfprg import gf2, nisan
from ptfprg.errors import SeedUnderflowError


def brute_expand(m, x0, hashes):
    """Block t applies h_i for each set bit t_{i-1}, innermost h_k."""
    k = len(hashes)
    out = []
    for t in range(1 << k):
        v = x0
        for i in range(k - 1, -1, -1):
            if (t >> i) & 1:
                v = gf2.mul(hashes[i][0], v, m) ^ hashes[i][1]
        out.append(v)
    return out


def params_strategy(max_m=64, max_k=6):
    @st.composite
    def build(draw):
        m = draw(st.integers(1, max_m))
        k = draw(st.integers(0, max_k))
        word = st.integers(0, (1 << m) - 1)
        x0 = draw(word)
        hs = tuple(nisan.HashFunc(m, draw(word), draw(word)) for _ in range(k))
        return nisan.NisanParams(m, k, x0, hs)
    return build()


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_pairwise_independence_exhaustive(m):
    assert nisan.check_pairwise_independence(m)


def test_pairwise_independence_detects_broken_family(monkeypatch):
    # dropping the offset b breaks independence: h(0) is always 0
    monkeypatch.setattr(nisan, "hash_family",
                        lambda m: [nisan.HashFunc(m, a, 0) for a in range(1 << m)] * (1 << m))
    assert not nisan.check_pairwise_independence(2)


@given(params_strategy())
def test_expand_matches_bit_definition(p):
    assert nisan.expand(p) == brute_expand(p.m, p.x0, [(h.a, h.b) for h in p.hashes])


@given(params_strategy(max_k=5).filter(lambda p: p.k >= 1))
def test_expand_recursion(p):
    out = nisan.expand(p)
    half = len(out) // 2
    lower = nisan.NisanParams(p.m, p.k - 1, p.x0, p.hashes[:-1])
    upper = nisan.NisanParams(p.m, p.k - 1, p.hashes[-1](p.x0), p.hashes[:-1])
    assert out[:half] == nisan.expand(lower)
    assert out[half:] == nisan.expand(upper)


@given(params_strategy())
def test_seed_accounting_and_roundtrip(p):
    assert p.seed_bits == p.m * (2 * p.k + 1)
    assert len(nisan.expand(p)) == 1 << p.k
    assert nisan.NisanParams.from_int(p.m, p.k, p.to_int()) == p
    assert nisan.NisanParams.from_words(p.m, p.words()) == p


def test_expand_k0_is_identity():
    assert nisan.expand(nisan.NisanParams(8, 0, 0xAB, ())) == [0xAB]


@pytest.mark.parametrize("m", [1, 3, 4, 7, 16, 33, 64])
def test_batch_matches_reference(m):
    rng = np.random.default_rng(m)
    k = 5
    mask = (1 << m) - 1
    words = rng.integers(0, 2 ** 63, size=(20, 2 * k + 1), dtype=np.uint64)
    words = words & np.uint64(mask) if m < 64 else words * np.uint64(3)
    got = nisan.expand_batch(m, words)
    for row, w in zip(got, words):
        assert [int(v) for v in row] == nisan.expand(nisan.NisanParams.from_words(m, w))


def test_from_bytes_underflow():
    with pytest.raises(SeedUnderflowError):
        nisan.NisanParams.from_bytes(16, 3, b"\x00" * 13)
    p = nisan.NisanParams.from_bytes(16, 3, bytes(range(14)))
    assert p.words()[0] == 0x0001


def test_hash_rejects_wide_words():
    with pytest.raises(ValueError):
        nisan.HashFunc(4, 16, 0)


def test_derive_nisan():
    m, k = nisan.derive_nisan(32, 2, 3, 0.01)
    # ceil(3 + 2 + log2(3200)) = ceil(16.64)
    assert (m, k) == (17, 5)


# --- ROBPs


def test_parity_and_threshold_exact_values():
    assert nisan.exact_expectation_uniform(nisan.parity_program(6, 2)) == pytest.approx(0.5)
    assert nisan.exact_expectation_uniform(nisan.first_block_zero_program(5, 3)) == pytest.approx(1 / 8)
    # at least 2 of 3 one-bit blocks nonzero: 4/8
    assert nisan.exact_expectation_uniform(nisan.threshold_program(3, 1, 2)) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(5))
def test_dp_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    prog = nisan.random_robp(rng, 4, 2, 5)
    hits = [nisan.run(prog, blocks) for blocks in nisan.iter_all_blocks(4, 2)]
    assert nisan.exact_expectation_uniform(prog) == pytest.approx(np.mean(hits), abs=1e-15)


def test_run_batch_matches_run():
    rng = np.random.default_rng(1)
    prog = nisan.random_robp(rng, 6, 2, 4)
    blocks = np.array(list(itertools.islice(nisan.iter_all_blocks(6, 2), 300)))
    assert nisan.run_batch(prog, blocks).tolist() == [nisan.run(prog, b) for b in blocks]


def test_robp_json_roundtrip():
    prog = nisan.random_robp(np.random.default_rng(3), 5, 2, 6)
    back = nisan.ROBP.from_json(prog.to_json())
    assert np.array_equal(back.transitions, prog.transitions)
    assert np.array_equal(back.accept, prog.accept)
    assert back.memory_bits == 3


def test_robp_validation():
    with pytest.raises(ValueError):
        nisan.ROBP(2, 1, 2, 0, np.zeros((2, 2, 3)), np.array([0]))
    with pytest.raises(ValueError):
        nisan.run(nisan.parity_program(2, 1), [0, 2])


def test_nisan_fools_small_programs():
    rng = np.random.default_rng(11)
    n, D = 8, 2
    m, k = nisan.derive_nisan(n, D, 3, 0.01)
    words = rng.integers(0, 1 << m, size=(20000, 2 * k + 1), dtype=np.uint64)
    blocks = nisan.robp_blocks_from_nisan(nisan.expand_batch(m, words), m, n, D)
    for prog in (nisan.parity_program(n, D), nisan.threshold_program(n, D, 6),
                 nisan.random_robp(rng, n, D, 8)):
        exact = nisan.exact_expectation_uniform(prog)
        assert abs(nisan.run_batch(prog, blocks).mean() - exact) < 0.02
