import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ptfprg import quadratic as Q
from ptfprg.quadratic import Quadratic

coef = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def quadratics(draw, min_n=1, max_n=4):
    n = draw(st.integers(min_n, max_n))
    A = draw(hnp.arrays(np.float64, (n, n), elements=coef))
    b = draw(hnp.arrays(np.float64, (n,), elements=coef))
    return Quadratic(A, b, draw(coef))


def gauss_expect(f, n, points=4):
    """E[f(X)] by tensor Gauss-Hermite quadrature (exact for degree <= 2*points-1)."""
    x, w = np.polynomial.hermite_e.hermegauss(points)
    w = w / w.sum()
    total = 0.0
    for idx in itertools.product(range(points), repeat=n):
        total += np.prod(w[list(idx)]) * f(x[list(idx)])
    return total


def test_canonical_symmetric_from_upper_triangle():
    q = Quadratic([[1.0, 4.0], [0.0, 2.0]], [0.0, 0.0])
    assert np.array_equal(q.A, [[1.0, 2.0], [2.0, 2.0]])
    assert not q.A.flags.writeable


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        Quadratic(np.eye(2), np.zeros(3))
    with pytest.raises(ValueError):
        Quadratic(np.eye(1), [np.nan])
    with pytest.raises(ValueError):
        Quadratic.zero(2) + Quadratic.zero(3)


def test_json_golden():
    q = Quadratic([[1.0, 0.5], [0.5, -2.0]], [3.0, 0.0], 0.25)
    assert q.to_json() == {"dim": 2, "A_upper_triangle": [1.0, 0.5, -2.0],
                           "b": [3.0, 0.0], "c": 0.25}


@given(quadratics())
def test_json_roundtrip(q):
    back = Quadratic.from_json(json.dumps(q.to_json()))
    assert np.array_equal(back.A, q.A) and np.array_equal(back.b, q.b) and back.c == q.c


@given(quadratics(), st.data())
def test_evaluate_matches_definition(q, data):
    x = data.draw(hnp.arrays(np.float64, (q.dim,), elements=coef))
    assert q(x) == pytest.approx(x @ q.A @ x + q.b @ x + q.c, rel=1e-12, abs=1e-9)
    batch = np.stack([x, 2 * x])
    assert np.allclose(q(batch), [q(x), q(2 * x)])


@given(quadratics(max_n=3))
def test_l2_norm_against_quadrature(q):
    want = math.sqrt(gauss_expect(lambda x: q(x) ** 2, q.dim))
    assert Q.l2_norm(q) == pytest.approx(want, rel=1e-9, abs=1e-9)


@given(quadratics(max_n=4))
def test_parseval(q):
    h = Q.hermite_expand(q)
    assert h.squared_norm() == pytest.approx(Q.l2_norm(q) ** 2, rel=1e-10, abs=1e-10)


@given(quadratics(max_n=4), st.data())
def test_hermite_expansion_reproduces_q(q, data):
    h = Q.hermite_expand(q)
    x = data.draw(hnp.arrays(np.float64, (q.dim,), elements=coef))
    val = sum(c * Q.hermite_value(dict(k), x) for k, c in h.items())
    assert val == pytest.approx(q(x), rel=1e-9, abs=1e-8)
    back = h.to_quadratic()
    assert np.allclose(back.A, q.A) and np.allclose(back.b, q.b) and back.c == pytest.approx(q.c, abs=1e-9)


@given(quadratics(min_n=2, max_n=3))
def test_hermite_coefficients_are_inner_products(q):
    h = Q.hermite_expand(q)
    for key in [(), ((0, 1),), ((0, 2),), ((0, 1), (1, 1))]:
        want = gauss_expect(lambda x: q(x) * Q.hermite_value(dict(key), x), q.dim)
        assert h.get(key, 0.0) == pytest.approx(want, abs=1e-9)


def test_hermite_orthonormal():
    for d1 in range(5):
        for d2 in range(5):
            got = gauss_expect(lambda x: Q.hermite_1d(d1, x[0]) * Q.hermite_1d(d2, x[0]), 1, 6)
            assert got == pytest.approx(float(d1 == d2), abs=1e-12)


def test_hermite_degree_cap():
    with pytest.raises(ValueError):
        Q.hermite_value({0: 3, 1: 2}, np.zeros(2))


@pytest.mark.parametrize("n", [1, 2, 5, 16, 40])
def test_eigendecompose_against_eigh(n):
    rng = np.random.default_rng(n)
    q = Q.random_quadratic(rng, n)
    spec = Q.eigendecompose(q)
    ref = np.linalg.eigvalsh(q.A)
    assert np.allclose(np.sort(spec.eigenvalues), ref, atol=1e-11 * np.abs(ref).max())
    assert np.allclose(spec.reconstruct(), q.A, atol=1e-11 * np.abs(ref).max())
    assert np.allclose(spec.basis.T @ spec.basis, np.eye(n), atol=1e-12)
    assert np.all(np.diff(np.abs(spec.eigenvalues)) <= 1e-15)
    assert 0 <= spec.sweeps <= Q.JACOBI_MAX_SWEEPS


def test_eigendecompose_sign_convention_and_zero():
    spec = Q.eigendecompose(Quadratic(np.diag([1.0, -3.0]), np.zeros(2)))
    assert np.array_equal(spec.eigenvalues, [-3.0, 1.0])
    assert np.all(spec.basis[np.argmax(np.abs(spec.basis), axis=0), [0, 1]] > 0)
    assert Q.eigendecompose(Quadratic.zero(3)).sweeps == 0


def test_jacobi_nonconvergence(monkeypatch):
    monkeypatch.setattr(Q, "JACOBI_MAX_SWEEPS", 0)
    with pytest.raises(Q.ConvergenceError):
        Q.eigendecompose(Q.random_quadratic(np.random.default_rng(0), 4))


@given(quadratics(), st.floats(0.01, 0.99), st.data())
def test_restrict_is_composition(q, delta, data):
    X = data.draw(hnp.arrays(np.float64, (q.dim,), elements=coef))
    x = data.draw(hnp.arrays(np.float64, (q.dim,), elements=coef))
    r = Q.restrict(q, X, delta)
    want = q(math.sqrt(1 - delta * delta) * X + delta * x)
    assert r(x) == pytest.approx(want, rel=1e-9, abs=1e-8)


@given(quadratics(min_n=2, max_n=6), st.integers(0, 6), st.floats(0.05, 0.5))
def test_decomposition_reassembles(q, r, delta):
    d = Q.decompose_approx_linear(q, r, delta)
    back = d.reassemble()
    scale = 1.0 + np.abs(q.A).max() + np.abs(q.b).max() + abs(q.c)
    assert np.allclose(back.A, q.A, atol=1e-9 * scale)
    assert np.allclose(back.b, q.b, atol=1e-9 * scale)
    assert back.c == pytest.approx(q.c, abs=1e-9 * scale)
    assert len(d.S) <= r
    assert d.forms.shape == (len(d.S), q.dim)
    # the residual has mean zero; it and v both ignore the absorbed forms
    assert np.trace(d.residual.A) + d.residual.c == pytest.approx(0.0, abs=1e-9 * scale)
    if d.S:
        assert np.allclose(d.residual.A @ d.forms.T, 0.0, atol=1e-8 * scale)
        assert np.allclose(d.forms @ d.v, 0.0, atol=1e-8 * scale)
    assert d.residual_norm == pytest.approx(Q.l2_norm(d.residual), rel=1e-9, abs=1e-9)


def test_decomposition_low_rank_absorbed():
    # rank-2 quadratic part with no linear term: both directions are bad
    A = np.zeros((5, 5))
    A[0, 0], A[1, 1] = 2.0, -1.0
    d = Q.decompose_approx_linear(Quadratic(A, np.zeros(5)), 2, 0.1)
    assert sorted(d.S) == [0, 1]
    assert d.ratio == 0.0 and d.residual_norm == 0.0


def test_decomposition_pure_quadratic_without_budget():
    d = Q.decompose_approx_linear(Quadratic(np.eye(3), np.zeros(3)), 0, 0.1)
    assert d.ratio == math.inf


def test_decomposition_rejects_bad_args():
    q = Quadratic(np.eye(2), np.ones(2))
    with pytest.raises(ValueError):
        Q.decompose_approx_linear(q, -1, 0.1)
    with pytest.raises(ValueError):
        Q.decompose_approx_linear(q, 1, 0.1, kappa=0.0)
