"""Degree-2 polynomials under the standard Gaussian measure.

A :class:`Quadratic` is ``x^T A x + b.x + c`` with ``A`` symmetric.  Hermite
coefficients use the orthonormal probabilists' family, so ``h_2(x) = (x^2-1)/sqrt(2)``
and Parseval gives ``|p|_2^2`` as the sum of squared coefficients.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConvergenceError

JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

_SQRT2 = math.sqrt(2.0)


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Quadratic:
    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        n = b.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A has shape {A.shape}, expected ({n}, {n})")
        # canonical symmetric form built from the upper triangle
        upper = np.triu((A + A.T) / 2.0)
        A = upper + np.triu(upper, 1).T
        c = float(self.c)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and math.isfinite(c)):
            raise ValueError("quadratic coefficients must be finite")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", c)

    @property
    def dim(self):
        return self.b.shape[0]

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)

    @classmethod
    def linear(cls, v, c=0.0):
        v = np.asarray(v, dtype=np.float64)
        return cls(np.zeros((v.size, v.size)), v, c)

    def __add__(self, other):
        if not isinstance(other, Quadratic):
            return NotImplemented
        _same_dim(self, other)
        return Quadratic(self.A + other.A, self.b + other.b, self.c + other.c)

    def __neg__(self):
        return Quadratic(-self.A, -self.b, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return Quadratic(s * self.A, s * self.b, s * self.c)

    def __call__(self, x):
        return evaluate(self, x)

    def is_linear(self):
        return not np.any(self.A)

    def to_json(self):
        iu = np.triu_indices(self.dim)
        return {
            "dim": self.dim,
            "A_upper_triangle": self.A[iu].tolist(),
            "b": self.b.tolist(),
            "c": self.c,
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        n = int(obj["dim"])
        upper = np.zeros((n, n))
        upper[np.triu_indices(n)] = obj["A_upper_triangle"]
        return cls(upper + np.triu(upper, 1).T, obj["b"], obj["c"])


def _same_dim(p, q):
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")


def evaluate(q, x):
    """Value of ``q`` at ``x``; ``x`` may carry leading batch axes."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (q.dim,):
        raise ValueError(f"point has trailing dimension {x.shape[-1:]} but q.dim = {q.dim}")
    val = np.einsum("...i,ij,...j->...", x, q.A, x) + x @ q.b + q.c
    return float(val) if val.ndim == 0 else val


def l2_norm(q):
    mean = np.trace(q.A) + q.c
    return math.sqrt(mean * mean + 2.0 * np.sum(q.A * q.A) + float(q.b @ q.b))


# --------------------------------------------------------------------------
# Hermite expansion


# Monomial coefficients of the orthonormal probabilists' Hermite polynomials.
_HERMITE_POLY = (
    (1.0,),
    (0.0, 1.0),
    (-1.0 / _SQRT2, 0.0, 1.0 / _SQRT2),
    (0.0, -3.0 / math.sqrt(6.0), 0.0, 1.0 / math.sqrt(6.0)),
    (3.0 / math.sqrt(24.0), 0.0, -6.0 / math.sqrt(24.0), 0.0, 1.0 / math.sqrt(24.0)),
)
MAX_HERMITE_DEGREE = len(_HERMITE_POLY) - 1


def hermite_1d(d, x):
    if not 0 <= d <= MAX_HERMITE_DEGREE:
        raise ValueError(f"Hermite degree {d} unsupported (max {MAX_HERMITE_DEGREE})")
    return np.polynomial.polynomial.polyval(x, _HERMITE_POLY[d])


def hermite_value(degrees, x):
    """Product of normalized Hermite polynomials, ``prod_i h_{degrees[i]}(x_i)``.

    ``degrees`` is either a dense sequence aligned with the last axis of ``x``
    or a mapping ``{coordinate: degree}``.
    """
    x = np.asarray(x, dtype=np.float64)
    items = degrees.items() if isinstance(degrees, Mapping) else enumerate(degrees)
    items = [(int(i), int(d)) for i, d in items if d]
    if any(d < 0 for _, d in items) or sum(d for _, d in items) > MAX_HERMITE_DEGREE:
        raise ValueError(f"total Hermite degree must be in [0, {MAX_HERMITE_DEGREE}]")
    out = np.ones(x.shape[:-1]) if x.ndim else np.float64(1.0)
    for i, d in items:
        out = out * hermite_1d(d, x[..., i])
    return float(out) if np.ndim(out) == 0 else out


class HermiteExpansion(dict):
    """Map from a Hermite multi-index to its coefficient.

    Keys are tuples of ``(coordinate, degree)`` pairs sorted by coordinate;
    ``()`` is the constant term.  Zero coefficients are never stored.
    """

    def __init__(self, dim, coeffs=()):
        super().__init__(coeffs)
        self.dim = dim

    def squared_norm(self):
        return math.fsum(v * v for v in self.values())

    def to_quadratic(self):
        n = self.dim
        A = np.zeros((n, n))
        b = np.zeros(n)
        c = 0.0
        for key, coef in self.items():
            degs = dict(key)
            if not degs:
                c += coef
            elif len(degs) == 2:
                (i, _), (j, _) = key
                A[i, j] += coef / 2.0
                A[j, i] += coef / 2.0
            else:
                ((i, d),) = key
                if d == 1:
                    b[i] += coef
                else:
                    A[i, i] += coef / _SQRT2
                    c -= coef / _SQRT2
        return Quadratic(A, b, c)


def hermite_expand(q):
    out = HermiteExpansion(q.dim)
    const = float(np.trace(q.A)) + q.c
    if const:
        out[()] = const
    for i in range(q.dim):
        if q.b[i]:
            out[((i, 1),)] = float(q.b[i])
        if q.A[i, i]:
            out[((i, 2),)] = _SQRT2 * float(q.A[i, i])
        for j in range(i + 1, q.dim):
            if q.A[i, j]:
                out[((i, 1), (j, 1))] = 2.0 * float(q.A[i, j])
    return out


# --------------------------------------------------------------------------
# Spectral decomposition and restriction


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues sorted by decreasing magnitude; ``basis`` columns match."""

    eigenvalues: np.ndarray
    basis: np.ndarray
    sweeps: int = 0

    def reconstruct(self):
        return (self.basis * self.eigenvalues) @ self.basis.T


def eigendecompose(q):
    A = q.A if isinstance(q, Quadratic) else np.asarray(q, dtype=np.float64)
    w, V, sweeps = kernels.jacobi_eigh(np.ascontiguousarray(A), JACOBI_REL_TOL, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    V = V[:, order]
    # sign convention: largest-magnitude entry of each column positive
    if V.size:
        pivots = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
        V = V * np.where(pivots < 0, -1.0, 1.0)
    return Spectrum(_frozen(w), _frozen(V), sweeps)


def restrict(q, X, delta):
    """The polynomial ``x -> q(sqrt(1 - delta^2) X + delta x)``."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (q.dim,):
        raise ValueError(f"restriction point has shape {X.shape}, expected ({q.dim},)")
    s = math.sqrt(1.0 - delta * delta)
    return Quadratic(
        delta * delta * q.A,
        2.0 * delta * s * (q.A @ X) + delta * q.b,
        evaluate(q, s * X),
    )


# --------------------------------------------------------------------------
# Approximate-linearity decomposition


@dataclass(frozen=True, eq=False)
class ApproxLinearDecomposition:
    S: tuple
    v: np.ndarray
    residual: Quadratic
    residual_norm: float
    ratio: float
    p0: Quadratic
    forms: np.ndarray  # rows are the retained unit vectors v_i, i in S

    @property
    def p0_dependence(self):
        return self.forms

    def reassemble(self):
        return self.p0 + Quadratic.linear(self.v) + self.residual


def decompose_approx_linear(q, r, delta, kappa=0.25, spectrum=None):
    """Split ``q`` into a function of <= r linear forms, a linear term, and a remainder.

    ``q`` is read as an already-restricted polynomial, so its eigenvalues are
    ``delta^2 a_i``; coordinate ``i`` is *bad* when its linear coefficient in the
    eigenbasis satisfies ``|C_i1| < kappa * delta * |a_i|``.  The first ``r`` bad
    coordinates (in decreasing ``|a_i|``) go into ``p0``.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    spec = spectrum if spectrum is not None else eigendecompose(q)
    lam = spec.eigenvalues
    U = spec.basis
    lin = U.T @ q.b  # C_{i,1}
    a = lam / (delta * delta)
    bad = (lam != 0.0) & (np.abs(lin) < kappa * delta * np.abs(a))
    S = tuple(int(i) for i in np.flatnonzero(bad)[:r])
    inS = np.zeros(q.dim, dtype=bool)
    inS[list(S)] = True
    off = ~inS

    Uo = U[:, off]
    v = Uo @ lin[off]
    A_res = (Uo * lam[off]) @ Uo.T
    residual = Quadratic(A_res, np.zeros(q.dim), -float(np.sum(lam[off])))
    p0 = Quadratic(q.A - residual.A, q.b - v, q.c - residual.c)

    res_norm = math.sqrt(2.0) * math.sqrt(float(np.sum(lam[off] ** 2)))
    v_norm = float(np.linalg.norm(lin[off]))
    if res_norm == 0.0:
        ratio = 0.0
    elif v_norm == 0.0:
        ratio = math.inf
    else:
        ratio = res_norm / v_norm
    return ApproxLinearDecomposition(
        S=S,
        v=_frozen(v),
        residual=residual,
        residual_norm=res_norm,
        ratio=ratio,
        p0=p0,
        forms=_frozen(U[:, inS].T),
    )


def random_quadratic(rng, n, scale=1.0):
    """Dense quadratic with i.i.d. N(0, scale^2) coefficients (A symmetrised)."""
    G = rng.standard_normal((n, n))
    return Quadratic(scale * (G + G.T) / 2.0, scale * rng.standard_normal(n),
                     scale * rng.standard_normal())
