"""Analytic values of ``E[sgn(p(X))]`` for quadratic ``p`` and standard Gaussian ``X``.

``sgn(0) = +1`` throughout.  After rotating to the eigenbasis and completing
squares, ``p(X)`` is ``sum_j lam_j (Z_j + mu_j)^2 + sigma Z_0 + c0``; its sign
expectation follows from Gil-Pelaez inversion of the characteristic function

    E[sgn Q] = (2/pi) * int_0^inf Im(phi(t)) / t dt.

Shapes with no or one quadratic direction get exact normal-CDF formulas, and
centred spheres use the chi-square tail.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special, stats

from .errors import NotClosedFormError
from .quadratic import Quadratic, eigendecompose, l2_norm

ABS_TOL = 1e-6
_EIG_RTOL = 1e-13


def sgn(x):
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def _phi_cdf(x):
    return 0.5 * special.erfc(-x / math.sqrt(2.0))


def _norm(v):
    # scaled so that tiny nonzero vectors do not underflow to norm 0
    v = np.asarray(v, dtype=np.float64)
    top = float(np.max(np.abs(v), initial=0.0))
    return top * float(np.linalg.norm(v / top)) if top > 0 else 0.0


def linear_sign_expectation(v, c):
    norm = _norm(v)
    if norm == 0.0:
        return 1.0 if c >= 0 else -1.0
    return float(2.0 * _phi_cdf(c / norm) - 1.0)


def spherical_support(q):
    """``(T, t)`` when ``q = sum_{i in T} x_i^2 - t`` (up to a positive scale), else None."""
    if np.any(q.b) or not np.allclose(q.A, np.diag(np.diag(q.A)), rtol=0, atol=0):
        return None
    d = np.diag(q.A)
    nz = d[d != 0]
    if nz.size == 0 or not np.all(nz == nz[0]) or nz[0] < 0:
        return None
    scale = nz[0]
    return np.flatnonzero(d), -q.c / scale


def canonical_form(q):
    """Eigen-coordinates: ``(lam, mu, sigma, c0)`` with ``p = sum lam (Z+mu)^2 + sigma Z0 + c0``."""
    spec = eigendecompose(q)
    lam = spec.eigenvalues
    beta = spec.basis.T @ q.b
    cutoff = _EIG_RTOL * max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    quad = np.abs(lam) > cutoff
    lam_q = lam[quad]
    mu = beta[quad] / (2.0 * lam_q)
    sigma = _norm(beta[~quad])
    c0 = q.c - float(np.sum(beta[quad] ** 2 / (4.0 * lam_q)))
    return lam_q, mu, sigma, c0


def _one_direction(lam, mu, c0):
    # lam (Z + mu)^2 + c0 >= 0
    r = -c0 / lam
    if r <= 0:
        # constant sign except on a null set
        return 1.0 if lam > 0 else -1.0
    s = math.sqrt(r)
    outside = _phi_cdf(-s - mu) + _phi_cdf(-s + mu)  # P(|Z + mu| > s)
    p_nonneg = outside if lam > 0 else 1.0 - outside
    return 2.0 * p_nonneg - 1.0


def _gil_pelaez(lam, mu, sigma, c0):
    lam = np.asarray(lam, dtype=np.float64)
    lm2 = lam * mu * mu

    def psi(t):
        # phi(t) = exp(i c0 t) psi(t); psi carries no fast oscillation
        z = 1.0 - 2j * lam * t
        return np.exp(-0.5 * sigma * sigma * t * t + np.sum(-0.5 * np.log(z) + 1j * lm2 * t / z))

    def head(t):
        if t == 0.0:
            # limit of Im(phi)/t at 0 is the mean
            return c0 + float(np.sum(lam + lm2))
        return (np.exp(1j * c0 * t) * psi(t)).imag / t

    split = 1.0
    kw = dict(limit=2000, epsabs=1e-11, epsrel=1e-11)
    val, err = integrate.quad(head, 0.0, split, **kw)
    if c0 == 0.0:
        tail, terr = integrate.quad(lambda t: psi(t).imag / t, split, np.inf, **kw)
        val, err = val + tail, err + terr
    else:
        # Im(e^{i c0 t} psi) = sin(c0 t) Re psi + cos(c0 t) Im psi; QAWF handles the tail
        for part, weight in ((lambda t: psi(t).real / t, "sin"), (lambda t: psi(t).imag / t, "cos")):
            tail, terr = integrate.quad(part, split, np.inf, weight=weight, wvar=c0,
                                        limlst=200, limit=2000, epsabs=1e-11)
            val, err = val + tail, err + terr
    return 2.0 / math.pi * val, 2.0 / math.pi * err


def sign_expectation(q, with_method=False):
    """``E[sgn(q(X))]`` to absolute error ``ABS_TOL``."""
    # the sign is scale-free; a power-of-two rescale keeps tiny terms above the
    # eigenvalue cutoff without rounding the coefficients
    top = max(float(np.max(np.abs(q.A), initial=0.0)), float(np.max(np.abs(q.b), initial=0.0)),
              abs(q.c))
    if top > 0:
        s = math.ldexp(1.0, math.frexp(top)[1])
        q = Quadratic(q.A / s, q.b / s, q.c / s)
    if q.is_linear():
        out, method = linear_sign_expectation(q.b, q.c), "linear"
    elif (sph := spherical_support(q)) is not None:
        T, t = sph
        out = 2.0 * float(stats.chi2.sf(t, len(T))) - 1.0 if t > 0 else 1.0
        method = "spherical"
    else:
        lam, mu, sigma, c0 = canonical_form(q)
        if lam.size == 0:
            out, method = linear_sign_expectation([sigma], c0), "linear"
        elif lam.size == 1 and sigma == 0.0:
            out, method = float(_one_direction(float(lam[0]), float(mu[0]), c0)), "one_direction"
        else:
            out, err = _gil_pelaez(lam, mu, sigma, c0)
            if not err < ABS_TOL / 10:
                raise NotClosedFormError(f"inversion integral error {err:.2e} exceeds budget")
            out = min(1.0, max(-1.0, out))
            method = "spectral"
    return (out, method) if with_method else out


def inf_abs(q):
    """``inf_x |q(x)|`` (0 when the sign changes or a root is reachable)."""
    lam, mu, sigma, c0 = canonical_form(q)
    if sigma > 0 or (lam.size and (lam.max() > 0) and (lam.min() < 0)):
        return 0.0
    if lam.size == 0:
        return abs(c0)
    if lam.max() > 0:  # positive semidefinite part, minimum c0
        return max(c0, 0.0)
    return max(-c0, 0.0)


def is_boundary_sensitive(q, oracle, tol=1e-12):
    """Constant-sign threshold whose zero set is still reachable, e.g. ``sgn(x1^2)``."""
    return abs(oracle) >= 1.0 - tol and inf_abs(q) <= tol * max(l2_norm(q), 1.0)


def normal_tail_two_sided(x):
    return float(2.0 * _phi_cdf(-abs(x)))
