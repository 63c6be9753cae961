import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from ptfprg import gf2, kernels


def sympy_poly(f):
    x = sympy.Symbol("x")
    coeffs = [int(b) for b in bin(f)[2:]]
    return sympy.Poly(coeffs, x, modulus=2)


@pytest.mark.parametrize("m", range(1, 65))
def test_modulus_irreducible_against_sympy(m):
    f = gf2.modulus(m)
    assert f.bit_length() == m + 1
    assert sympy_poly(f).is_irreducible
    assert gf2.is_irreducible(f)


@pytest.mark.parametrize("m", range(1, 13))
def test_modulus_is_lexicographically_first(m):
    first = next(f for f in range(1 << m, 1 << (m + 1)) if sympy_poly(f).is_irreducible)
    assert gf2.modulus(m) == first


def test_is_irreducible_small_cases():
    # x^2 + x + 1 irreducible, x^2 + 1 = (x + 1)^2 is not
    assert gf2.is_irreducible(0b111)
    assert not gf2.is_irreducible(0b101)
    assert not gf2.is_irreducible(0b10010)  # divisible by x


def test_gf16_multiplication_table_entry():
    # in GF(2)[x]/(x^4 + x + 1): x^3 * x = x + 1
    assert gf2.modulus(4) == 0b10011
    assert gf2.mul(0b1000, 0b0010, 4) == 0b0011


def test_width_out_of_range():
    with pytest.raises(ValueError):
        gf2.modulus(0)
    with pytest.raises(ValueError):
        gf2.modulus(65)


widths = st.integers(1, 64)


@given(widths, st.data())
def test_field_axioms(m, data):
    word = st.integers(0, (1 << m) - 1)
    a, b, c = data.draw(word), data.draw(word), data.draw(word)
    assert gf2.mul(a, b, m) == gf2.mul(b, a, m)
    assert gf2.mul(a, gf2.mul(b, c, m), m) == gf2.mul(gf2.mul(a, b, m), c, m)
    assert gf2.mul(a, b ^ c, m) == gf2.mul(a, b, m) ^ gf2.mul(a, c, m)
    assert gf2.mul(a, 1, m) == a
    assert gf2.mul(a, b, m) < (1 << m)


@given(widths, st.data())
def test_nonzero_elements_invertible(m, data):
    a = data.draw(st.integers(1, (1 << m) - 1))
    # a^(2^m - 2) is the inverse in GF(2^m)
    inv, base, e = 1, a, (1 << m) - 2
    while e:
        if e & 1:
            inv = gf2.mul(inv, base, m)
        base = gf2.mul(base, base, m)
        e >>= 1
    assert gf2.mul(a, inv, m) == 1


@pytest.mark.parametrize("m", [1, 2, 4, 8, 17, 33, 63, 64])
def test_kernel_mul_matches_reference(m):
    rng = np.random.default_rng(m)
    a = rng.integers(0, 1 << 63, size=200, dtype=np.uint64) & np.uint64((1 << m) - 1) \
        if m < 64 else rng.integers(0, 1 << 63, size=200, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    b = np.roll(a, 1)
    got = kernels.gf_mul_array(a, b, m, np.uint64(gf2.IRREDUCIBLE_LOW[m]))
    want = [gf2.mul(int(x), int(y), m) for x, y in zip(a, b)]
    assert [int(g) for g in got] == want
