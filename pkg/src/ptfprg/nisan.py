"""Nisan's generator for read-once branching programs, plus an explicit ROBP model.

The hash family is ``h(x) = a*x + b`` over GF(2^m).  Expansion follows
``G_0(x) = (x)`` and ``G_j(x) = G_{j-1}(x) || G_{j-1}(h_j(x))``, so block ``t``
is ``h_1^{t_0}(h_2^{t_1}(... h_k^{t_{k-1}}(x)))``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import gf2, kernels
from .errors import SeedUnderflowError

DEFAULT_C1 = 1.0
DP_BUDGET = 64 * 16 * 64 * 16  # W * 2^D * n ceiling for the exact oracle


@dataclass(frozen=True)
class HashFunc:
    m: int
    a: int
    b: int

    def __post_init__(self):
        top = 1 << self.m
        if not (0 <= self.a < top and 0 <= self.b < top):
            raise ValueError(f"hash coefficients must be {self.m}-bit words")

    def __call__(self, x):
        return gf2.mul(self.a, x, self.m) ^ self.b


def hash_family(m):
    """Every affine map over GF(2^m), in (a, b) lexicographic order."""
    return [HashFunc(m, a, b) for a in range(1 << m) for b in range(1 << m)]


def check_pairwise_independence(m):
    """Exhaustively count ``(h(x1), h(x2))`` over the family for every ``x1 != x2``.

    Returns True iff every output pair occurs exactly once, i.e. with
    probability ``2^-2m``.
    """
    family = hash_family(m)
    size = 1 << m
    for x1 in range(size):
        for x2 in range(size):
            if x1 == x2:
                continue
            counts = np.zeros((size, size), dtype=np.int64)
            for h in family:
                counts[h(x1), h(x2)] += 1
            if not np.all(counts == 1):
                return False
    return True


@dataclass(frozen=True)
class NisanParams:
    m: int
    k: int
    x0: int
    hashes: tuple = field(default=())

    def __post_init__(self):
        if not 1 <= self.m <= gf2.MAX_WIDTH:
            raise ValueError(f"block width m must be in [1, {gf2.MAX_WIDTH}]")
        if self.k < 0 or len(self.hashes) != self.k:
            raise ValueError("need exactly k hash functions")
        if not 0 <= self.x0 < (1 << self.m):
            raise ValueError("x0 must be an m-bit word")
        object.__setattr__(self, "hashes", tuple(self.hashes))

    @property
    def seed_bits(self):
        return seed_bits(self.m, self.k)

    @property
    def n_blocks(self):
        return 1 << self.k

    @classmethod
    def from_words(cls, m, words):
        """Build from the layout ``(x0, a_1, b_1, ..., a_k, b_k)``."""
        words = [int(w) for w in words]
        if len(words) % 2 != 1:
            raise ValueError("word count must be odd: x0 then (a, b) pairs")
        k = (len(words) - 1) // 2
        hashes = tuple(HashFunc(m, words[1 + 2 * j], words[2 + 2 * j]) for j in range(k))
        return cls(m, k, words[0], hashes)

    @classmethod
    def from_int(cls, m, k, value):
        """Parse ``seed_bits(m, k)`` bits, big-endian, from the integer ``value``."""
        nw = 2 * k + 1
        mask = (1 << m) - 1
        words = [(value >> (m * (nw - 1 - i))) & mask for i in range(nw)]
        return cls.from_words(m, words)

    @classmethod
    def from_bytes(cls, m, k, seed):
        need = seed_bits(m, k)
        if 8 * len(seed) < need:
            raise SeedUnderflowError(f"Nisan seed needs {need} bits, got {8 * len(seed)}")
        value = int.from_bytes(seed, "big") >> (8 * len(seed) - need)
        return cls.from_int(m, k, value)

    def words(self):
        out = [self.x0]
        for h in self.hashes:
            out += [h.a, h.b]
        return out

    def to_int(self):
        value = 0
        for w in self.words():
            value = (value << self.m) | w
        return value


def seed_bits(m, k):
    return m * (2 * k + 1)


def expand(params):
    """All ``2^k`` output blocks as Python ints."""
    blocks = [params.x0]
    for h in reversed(params.hashes):
        nxt = []
        for v in blocks:
            nxt += [v, h(v)]
        blocks = nxt
    return blocks


def expand_batch(m, words):
    """Vectorised expansion for an ``(S, 2k+1)`` uint64 array of layout words."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    return kernels.nisan_expand_batch(
        np.ascontiguousarray(words[:, 0]),
        np.ascontiguousarray(words[:, 1::2]),
        np.ascontiguousarray(words[:, 2::2]),
        m,
        np.uint64(gf2.IRREDUCIBLE_LOW[m]),
    )


def derive_nisan(n_blocks, D, M, eps, c1=DEFAULT_C1):
    """Block width and depth for ``n_blocks`` steps of ``D`` bits, memory ``M``, error ``eps``.

    ``m = ceil(c1 * (M + D + log2(n_blocks / eps)))`` and ``k = ceil(log2 n_blocks)``.
    """
    if n_blocks < 1 or D < 1 or M < 0 or not eps > 0:
        raise ValueError("n_blocks, D must be >= 1, M >= 0, eps > 0")
    m = math.ceil(c1 * (M + D + math.log2(n_blocks / eps)) - 1e-9)
    k = (n_blocks - 1).bit_length()
    return m, k


# --------------------------------------------------------------------------
# Read-once branching programs


@dataclass(frozen=True, eq=False)
class ROBP:
    """Step-indexed program: ``transitions[t, state, block] -> state``."""

    n: int
    D: int
    states: int
    start: int
    transitions: np.ndarray
    accept: np.ndarray

    def __post_init__(self):
        T = np.array(self.transitions, dtype=np.int64)
        acc = np.zeros(self.states, dtype=bool)
        a = np.asarray(self.accept)
        if a.dtype == bool and a.shape == (self.states,):
            acc[:] = a
        else:
            acc[a.astype(np.int64)] = True
        if T.shape != (self.n, self.states, 1 << self.D):
            raise ValueError(f"transition table shape {T.shape} != "
                             f"({self.n}, {self.states}, {1 << self.D})")
        if T.size and (T.min() < 0 or T.max() >= self.states):
            raise ValueError("transition targets out of range")
        if not 0 <= self.start < self.states:
            raise ValueError("start state out of range")
        T.setflags(write=False)
        acc.setflags(write=False)
        object.__setattr__(self, "transitions", T)
        object.__setattr__(self, "accept", acc)

    @property
    def memory_bits(self):
        return max(1, (self.states - 1).bit_length())

    def to_json(self):
        return {
            "n": self.n,
            "D": self.D,
            "states": self.states,
            "start": self.start,
            "accept": np.flatnonzero(self.accept).tolist(),
            "transitions": self.transitions.tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["n"], obj["D"], obj["states"], obj["start"],
                   np.array(obj["transitions"]), np.array(obj["accept"], dtype=np.int64))


def run(prog, blocks):
    blocks = list(blocks)
    if len(blocks) != prog.n:
        raise ValueError(f"program reads {prog.n} blocks, got {len(blocks)}")
    state = prog.start
    for t, blk in enumerate(blocks):
        if not 0 <= blk < (1 << prog.D):
            raise ValueError(f"block {blk} is not a {prog.D}-bit value")
        state = prog.transitions[t, state, blk]
    return bool(prog.accept[state])


def run_batch(prog, blocks):
    blocks = np.ascontiguousarray(blocks, dtype=np.int64)
    if blocks.ndim != 2 or blocks.shape[1] != prog.n:
        raise ValueError(f"expected (S, {prog.n}) block array, got {blocks.shape}")
    return kernels.robp_run_batch(prog.transitions, prog.accept, prog.start, blocks)


def state_distributions(prog):
    """Forward DP: distribution over states after each step under uniform blocks."""
    if prog.states * (1 << prog.D) * prog.n > DP_BUDGET:
        raise ValueError("program exceeds the exact-oracle budget")
    dist = np.zeros(prog.states)
    dist[prog.start] = 1.0
    out = [dist]
    p = 1.0 / (1 << prog.D)
    for t in range(prog.n):
        nxt = np.zeros(prog.states)
        for blk in range(1 << prog.D):
            np.add.at(nxt, prog.transitions[t, :, blk], dist * p)
        dist = nxt
        out.append(dist)
    return out


def exact_expectation_uniform(prog):
    return float(state_distributions(prog)[-1][prog.accept].sum())


def random_robp(rng, n, D, W):
    T = rng.integers(0, W, size=(n, W, 1 << D))
    accept = rng.random(W) < 0.5
    return ROBP(n, D, W, 0, T, accept)


def parity_program(n, D):
    T = np.empty((n, 2, 1 << D), dtype=np.int64)
    for blk in range(1 << D):
        flip = bin(blk).count("1") & 1
        T[:, 0, blk] = flip
        T[:, 1, blk] = 1 - flip
    return ROBP(n, D, 2, 0, T, np.array([0]))


def first_block_zero_program(n, D):
    # state 0: still undecided/accepting, state 1: rejected
    T = np.zeros((n, 2, 1 << D), dtype=np.int64)
    T[0, 0, 1:] = 1
    T[:, 1, :] = 1
    T[1:, 0, :] = 0
    return ROBP(n, D, 2, 0, T, np.array([0]))


def threshold_program(n, D, threshold):
    """Accept iff at least ``threshold`` blocks are nonzero (counter saturates at threshold)."""
    W = threshold + 1
    T = np.empty((n, W, 1 << D), dtype=np.int64)
    for s in range(W):
        T[:, s, 0] = s
        T[:, s, 1:] = min(s + 1, threshold)
    return ROBP(n, D, W, 0, T, np.array([threshold]))


def robp_blocks_from_nisan(blocks, m, n, D):
    """Top ``D`` bits of each of the first ``n`` Nisan blocks."""
    if D > m:
        raise ValueError("ROBP block width exceeds Nisan block width")
    return (np.asarray(blocks, dtype=np.uint64)[:, :n] >> np.uint64(m - D)).astype(np.int64)


def iter_all_blocks(n, D):
    return itertools.product(range(1 << D), repeat=n)
