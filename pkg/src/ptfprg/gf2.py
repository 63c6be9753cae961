"""Arithmetic in GF(2^m) for m <= 64 on plain Python ints.

Field elements are integers in [0, 2^m).  The modulus for each width is the
lexicographically first irreducible polynomial of that degree; ``IRREDUCIBLE_LOW[m]``
holds it with the leading x^m term dropped.
"""

MAX_WIDTH = 64

# Index m -> low bits of the first irreducible degree-m polynomial over GF(2).
# m=8 is 0x11B, m=64 is x^64 + x^4 + x^3 + x + 1.
IRREDUCIBLE_LOW = (
    None, 0, 3, 3, 3, 5, 3, 3, 27, 3, 9, 5, 9, 27, 33, 3,
    43, 9, 9, 39, 9, 5, 3, 33, 27, 9, 27, 39, 3, 5, 3, 9,
    141, 75, 27, 5, 53, 63, 99, 17, 57, 9, 39, 89, 33, 27, 3, 33,
    45, 113, 29, 75, 9, 71, 125, 71, 149, 17, 99, 123, 3, 39, 105, 3,
    27,
)


def modulus(m):
    """Full modulus polynomial (with the x^m term) for width ``m``."""
    _check_width(m)
    return (1 << m) | IRREDUCIBLE_LOW[m]


def _check_width(m):
    if not 1 <= m <= MAX_WIDTH:
        raise ValueError(f"field width must be in [1, {MAX_WIDTH}], got {m}")


def clmul(a, b):
    """Carryless product of two non-negative ints (no reduction)."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def poly_mod(a, f):
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def mul(a, b, m):
    """Product of ``a`` and ``b`` in GF(2^m)."""
    return poly_mod(clmul(a, b), modulus(m))


def poly_gcd(a, b):
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _prime_factors(m):
    out = []
    d = 2
    while d * d <= m:
        if m % d == 0:
            out.append(d)
            while m % d == 0:
                m //= d
        d += 1
    if m > 1:
        out.append(m)
    return out


def is_irreducible(f):
    """Ben-Or style test: x^(2^m) = x mod f and gcd(x^(2^(m/p)) - x, f) = 1."""
    m = f.bit_length() - 1
    if m < 1:
        return False
    x = poly_mod(2, f)

    def frob(e):
        r = x
        for _ in range(e):
            r = poly_mod(clmul(r, r), f)
        return r

    if frob(m) != x:
        return False
    return all(poly_gcd(f, frob(m // p) ^ x) == 1 for p in _prime_factors(m))
