"""Discretised Box-Muller: a bounded Gaussian surrogate driven by two grid indices.

With ``N = floor(delta^-3)`` the radius and angle uniforms are snapped to the
half-integer grid ``(i + 0.5) / N``.  The result differs from the exactly
transformed Gaussian by more than ``delta`` with probability below ``delta``
and never exceeds ``sqrt(2 ln(2N))`` in magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SeedUnderflowError


@dataclass(frozen=True)
class ApproxGaussianSpec:
    delta: float
    N: int
    bits_per_uniform: int

    @classmethod
    def from_delta(cls, delta):
        if not 0.0 < delta < 0.5:
            raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
        N = _floor_inverse_cube(delta)
        if N < 8:
            raise ValueError(f"delta={delta} gives N={N} < 8")
        return cls(float(delta), N, (N - 1).bit_length())

    @property
    def bits_total(self):
        return 2 * self.bits_per_uniform

    @property
    def bound(self):
        """Deterministic ceiling on ``|Y|``."""
        return math.sqrt(2.0 * math.log(2 * self.N))


def _floor_inverse_cube(delta):
    # snap to the nearest integer when within rounding noise, so 0.01 -> 10**6
    x = delta ** -3.0
    near = round(x)
    if abs(x - near) <= 1e-9 * x:
        return int(near)
    return int(math.floor(x))


def _check_index(name, i, N):
    if not 0 <= i < N:
        raise ValueError(f"{name}={i} outside [0, {N})")


def sample(spec, j, k):
    """Grid value ``sqrt(-2 ln z') cos(2 pi theta')`` at ``z' = (j+.5)/N``, ``theta' = (k+.5)/N``."""
    N = spec.N
    _check_index("j", j, N)
    _check_index("k", k, N)
    Nf = float(N)
    if j >= N - j:
        L = -math.log1p(-((float(N - j) - 0.5) / Nf))
    else:
        L = -math.log((float(j) + 0.5) / Nf)
    return math.sqrt(2.0 * L) * math.cos(2.0 * math.pi * ((float(k) + 0.5) / Nf))


def sample_batch(spec, j, k):
    """Vectorised :func:`sample`; requires ``N < 2^64``."""
    if spec.N.bit_length() > 64:
        raise ValueError("batch sampling needs N < 2^64")
    j = np.asarray(j, dtype=np.uint64)
    k = np.asarray(k, dtype=np.uint64)
    if np.any(j >= np.uint64(spec.N)) or np.any(k >= np.uint64(spec.N)):
        raise ValueError("grid index out of range")
    return kernels.grid_gaussian_batch(j, k, np.uint64(spec.N))


def grid_index(spec, u):
    """Half-integer grid index nearest to ``u``: ``round(u N - 0.5)`` clamped to ``[0, N)``."""
    i = math.floor(u * spec.N)
    return min(max(i, 0), spec.N - 1)


def coupled_pair(spec, u, v):
    """Exact Box-Muller value ``X`` and its grid-snapped partner ``Y`` from the same uniforms."""
    if not (0.0 < u < 1.0 and 0.0 < v < 1.0):
        raise ValueError("u and v must lie in the open unit interval")
    x = math.sqrt(-2.0 * math.log(u)) * math.cos(2.0 * math.pi * v)
    return x, sample(spec, grid_index(spec, u), grid_index(spec, v))


def coupled_pairs(spec, u, v):
    """Vectorised :func:`coupled_pair` over arrays of uniforms."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = np.sqrt(-2.0 * np.log(u)) * np.cos(2.0 * np.pi * v)
    top = np.uint64(spec.N - 1)
    j = np.minimum(np.floor(u * spec.N).astype(np.uint64), top)
    k = np.minimum(np.floor(v * spec.N).astype(np.uint64), top)
    return x, sample_batch(spec, j, k)


def in_failure_region(spec, u):
    """True when ``u`` sits below the first grid midpoint, where the coupling can break."""
    return u < 0.5 / spec.N


def consume_bits(spec, bits, offset=0):
    """Parse ``(j, k)`` from a bit sequence: two big-endian blocks, each reduced mod N.

    ``bits`` is any indexable sequence of 0/1 values.  Returns ``(j, k, new_offset)``.
    """
    need = spec.bits_total
    if len(bits) - offset < need:
        raise SeedUnderflowError(
            f"need {need} bits at offset {offset}, stream has {len(bits) - offset}")
    w = spec.bits_per_uniform
    j = _bits_to_int(bits[offset:offset + w]) % spec.N
    k = _bits_to_int(bits[offset + w:offset + need]) % spec.N
    return j, k, offset + need


def _bits_to_int(bits):
    out = 0
    for bit in bits:
        out = (out << 1) | int(bit)
    return out
