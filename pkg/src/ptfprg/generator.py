"""The composed generator: ell Nisan-seeded families of approximate Gaussians.

Each family ``Y_i`` is ``n`` grid Gaussians whose indices are read from the
Nisan expansion of the family's own seed slice.  The output is

    Y = sum_i w_i Y_i / sqrt(sum_i w_i^2),    w_i = (1 - delta^3)^((i-1)/2)

Seed layout (frozen): the master seed is a big-endian bit string made of
``ell`` contiguous family slices.  A slice is ``2k+1`` words of ``m`` bits,
``x0, a_1, b_1, ..., a_k, b_k``.  Inside a family the expanded blocks form a
big-endian bit stream; variable ``v`` starts at block ``v * blocks_per_var``
and reads ``j`` then ``k`` (``bits_per_uniform`` bits each), both reduced mod N.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import approx_gaussian, gf2, kernels, nisan
from .approx_gaussian import ApproxGaussianSpec
from .errors import SeedUnderflowError

PRECISION_FLOOR = 2.0 ** -64
# tiny n with large epsilon gives a theoretical precision above the grid's
# valid range; it is lowered to this ceiling
PRECISION_CEILING = 0.25
MAX_BLOCK_BITS = 64


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str
    n: int
    delta: float
    ell: int
    delta1: float
    delta2: float
    M: int
    epsilon: float | None = None
    C: float | None = None
    delta1_theory: float | None = None
    delta2_theory: float | None = None
    precision_floor: float = PRECISION_FLOOR
    c1: float = nisan.DEFAULT_C1
    N: int = 0
    bits_per_uniform: int = 0
    block_bits_derived: int = 0
    block_bits: int = 0
    blocks_per_var: int = 0
    n_blocks: int = 0
    k: int = 0
    weights: tuple = field(default=(), repr=False)
    normalizer: float = 0.0

    @property
    def bits_total(self):
        return 2 * self.bits_per_uniform

    @property
    def words_per_family(self):
        return 2 * self.k + 1

    @property
    def family_seed_bits(self):
        return nisan.seed_bits(self.block_bits, self.k)

    @property
    def seed_length(self):
        return self.ell * self.family_seed_bits

    @property
    def seed_bytes(self):
        return (self.seed_length + 7) // 8

    @property
    def approx_spec(self):
        return ApproxGaussianSpec(self.delta1, self.N, self.bits_per_uniform)

    @property
    def fast_path(self):
        """Whether the compiled batch kernels can handle this layout."""
        return self.bits_per_uniform <= 64 and self.N.bit_length() <= 64

    def seed_layout(self):
        return {
            "families": self.ell,
            "family_bits": self.family_seed_bits,
            "words_per_family": self.words_per_family,
            "word_bits": self.block_bits,
            "word_order": ["x0"] + [f"{p}{j}" for j in range(1, self.k + 1) for p in ("a", "b")],
            "endianness": "big",
            "blocks_per_variable": self.blocks_per_var,
            "bits_per_uniform": self.bits_per_uniform,
            "variable_read_order": ["j", "k"],
            "total_bits": self.seed_length,
        }

    def to_json(self):
        d = asdict(self)
        d["weights"] = list(self.weights)
        d["seed_length"] = self.seed_length
        d["seed_layout"] = self.seed_layout()
        d["N"] = str(self.N)  # may exceed 2^53
        return d

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        names = cls.__dataclass_fields__
        kw = {k: v for k, v in obj.items() if k in names}
        kw["N"] = int(kw["N"])
        kw["weights"] = tuple(kw["weights"])
        return cls(**kw)

    def digest(self):
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _finish(mode, n, delta, ell, delta1, delta2, M, c1, block_bits=None, **extra):
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if ell < 1:
        raise ValueError("ell must be positive")
    spec = ApproxGaussianSpec.from_delta(delta1)
    bits_total = spec.bits_total
    derived = math.ceil(c1 * (M + bits_total + math.log2(n / delta2)) - 1e-9)
    m = block_bits if block_bits is not None else min(MAX_BLOCK_BITS, derived)
    if not 1 <= m <= MAX_BLOCK_BITS:
        raise ValueError(f"block width must be in [1, {MAX_BLOCK_BITS}]")
    bpv = -(-bits_total // m)
    n_blocks = n * bpv
    k = (n_blocks - 1).bit_length()
    d3 = delta ** 3
    weights = tuple((1.0 - d3) ** ((i - 1) / 2.0) for i in range(1, ell + 1))
    normalizer = math.sqrt(math.fsum(w * w for w in weights))
    return GeneratorConfig(
        mode=mode, n=n, delta=delta, ell=ell, delta1=delta1, delta2=delta2, M=M, c1=c1,
        N=spec.N, bits_per_uniform=spec.bits_per_uniform, block_bits_derived=derived,
        block_bits=m, blocks_per_var=bpv, n_blocks=n_blocks, k=k, weights=weights,
        normalizer=normalizer, **extra,
    )


def derive_params(n, epsilon, C=1.0, precision_floor=PRECISION_FLOOR, c1=nisan.DEFAULT_C1):
    """Full parameter set for dimension ``n`` and target error ``epsilon``.

    ``1/delta = C ln(1/epsilon)``, ``ell = ceil(delta^-3 ln(1/epsilon))``; the
    approximate-Gaussian precision and ROBP error are ``exp(-ln(n/delta)/delta)``,
    raised to ``precision_floor`` when smaller and lowered to ``PRECISION_CEILING``
    when larger; memory is ``delta^-2 ln(n/delta)`` bits.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if C < 1.0:
        raise ValueError("C must be at least 1")
    if n < 1:
        raise ValueError("n must be positive")
    L = math.log(1.0 / epsilon)
    delta = 1.0 / (C * L)
    if delta >= 1.0:
        raise ValueError(f"epsilon={epsilon} with C={C} gives delta={delta:.4g} >= 1; "
                         f"need epsilon < exp(-1/C)")
    ell = math.ceil(delta ** -3 * L - 1e-9)
    log_term = math.log(n / delta)
    theory = math.exp(-log_term / delta)
    d1 = min(max(theory, precision_floor), PRECISION_CEILING)
    M = math.ceil(delta ** -2 * log_term - 1e-9)
    return _finish("theory", n, delta, ell, d1, d1, M, c1, epsilon=epsilon, C=C,
                   delta1_theory=theory, delta2_theory=theory,
                   precision_floor=precision_floor)


def empirical_params(n, delta, ell, delta1, M, delta2=None, block_bits=None,
                     c1=nisan.DEFAULT_C1):
    """Desk-scale configuration with every knob set directly."""
    delta2 = delta1 if delta2 is None else delta2
    return _finish("empirical", n, delta, ell, delta1, delta2, M, c1, block_bits=block_bits)


def seed_length(config):
    return config.seed_length


def asymptotic_seed_formula(n, epsilon):
    """Unconstanted ``log(1/eps)^6 log(n) loglog(n/eps)``, natural logs."""
    L = math.log(1.0 / epsilon)
    inner = math.log(n / epsilon)
    return L ** 6 * math.log(n) * math.log(inner) if inner > 1.0 else 0.0


# --------------------------------------------------------------------------
# Seeds


def words_from_seed(config, master_seed):
    """Split a master seed (bytes, big-endian bits) into ``(ell, 2k+1)`` layout words."""
    have = 8 * len(master_seed)
    F = config.family_seed_bits
    if have < config.seed_length:
        family = have // F
        raise SeedUnderflowError(
            f"master seed has {have} bits, layout needs {config.seed_length}; "
            f"family {family} is incomplete", family=family)
    value = int.from_bytes(master_seed, "big") >> (have - config.seed_length)
    m = config.block_bits
    nw = config.words_per_family
    mask = (1 << m) - 1
    total_words = config.ell * nw
    flat = [(value >> (m * (total_words - 1 - i))) & mask for i in range(total_words)]
    return np.array(flat, dtype=np.uint64).reshape(config.ell, nw)


def seed_from_words(config, words):
    """Inverse of :func:`words_from_seed`, padded with zero bits to whole bytes."""
    value = 0
    for w in np.asarray(words, dtype=np.uint64).reshape(-1):
        value = (value << config.block_bits) | int(w)
    pad = 8 * config.seed_bytes - config.seed_length
    return (value << pad).to_bytes(config.seed_bytes, "big")


def random_words(config, rng, size):
    """Uniform layout words for ``size`` independent master seeds."""
    raw = rng.bit_generator.random_raw((size, config.ell, config.words_per_family))
    mask = np.uint64((1 << config.block_bits) - 1)
    return np.asarray(raw, dtype=np.uint64) & mask


# --------------------------------------------------------------------------
# Sampling


def _family_reference(config, words):
    params = nisan.NisanParams.from_words(config.block_bits, [int(w) for w in words])
    blocks = nisan.expand(params)
    m = config.block_bits
    bits = []
    for blk in blocks[:config.n_blocks]:
        bits.extend((blk >> (m - 1 - t)) & 1 for t in range(m))
    spec = config.approx_spec
    out = np.empty(config.n)
    for v in range(config.n):
        j, kk, _ = approx_gaussian.consume_bits(spec, bits, v * config.blocks_per_var * m)
        out[v] = approx_gaussian.sample(spec, j, kk)
    return out


def families(config, master_seed):
    """The ``(ell, n)`` matrix of family outputs ``Y_1 .. Y_ell`` for one seed."""
    words = words_from_seed(config, master_seed)
    return np.stack([_family_reference(config, w) for w in words])


def sample(config, master_seed):
    """One generator output (reference path, any layout)."""
    fam = families(config, master_seed)
    acc = np.zeros(config.n)
    comp = np.zeros(config.n)
    for w, y_i in zip(config.weights, fam):
        y = w * y_i - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc / config.normalizer


def _kernel_args(config):
    return (config.block_bits, np.uint64(gf2.IRREDUCIBLE_LOW[config.block_bits]), config.n,
            config.blocks_per_var, config.bits_per_uniform, np.uint64(config.N))


def _check_words(config, words):
    words = np.ascontiguousarray(words, dtype=np.uint64)
    if words.ndim == 2:
        words = words[None]
    expect = (config.ell, config.words_per_family)
    if words.shape[1:] != expect:
        raise ValueError(f"words have shape {words.shape}, expected (S, {expect[0]}, {expect[1]})")
    return words


def sample_batch(config, words):
    """Generator outputs for an ``(S, ell, 2k+1)`` array of layout words -> ``(S, n)``."""
    words = _check_words(config, words)
    if not config.fast_path:
        return np.stack([sample(config, seed_from_words(config, w)) for w in words])
    return kernels.composed_batch(words, *_kernel_args(config),
                                  np.asarray(config.weights, dtype=np.float64),
                                  config.normalizer)


def family_batch(config, words):
    """Per-family outputs ``(S, ell, n)`` for an array of layout words."""
    words = _check_words(config, words)
    if not config.fast_path:
        return np.stack([families(config, seed_from_words(config, w)) for w in words])
    return kernels.family_batch(words, *_kernel_args(config))


def hybrid_weight_sum(config, i):
    """Analytic per-coordinate variance of the ``i``-th hybrid (equals 1)."""
    d3 = config.delta ** 3
    return (1.0 - d3) ** i + d3 * math.fsum(w * w for w in config.weights[:i])


def hybrid_sample(config, X, i, fams):
    """``(1 - delta^3)^(i/2) X + delta^(3/2) sum_{j <= i} w_j Y_j``.

    ``fams`` holds family outputs with the family index on axis -2, i.e. shape
    ``(>= i, n)`` or ``(S, >= i, n)``.
    """
    if not 0 <= i <= config.ell:
        raise ValueError(f"hybrid index must lie in [0, {config.ell}], got {i}")
    X = np.asarray(X, dtype=np.float64)
    if i == 0:
        return X.copy()
    fams = np.asarray(fams, dtype=np.float64)
    w = np.asarray(config.weights[:i])
    mix = np.tensordot(w, fams[..., :i, :], axes=([0], [-2])) if fams.ndim == 2 else \
        np.einsum("f,sfn->sn", w, fams[:, :i, :])
    d3 = config.delta ** 3
    return (1.0 - d3) ** (i / 2.0) * X + d3 ** 0.5 * mix
