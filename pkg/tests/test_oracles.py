import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import integrate, stats

from ptfprg import oracles
from ptfprg.errors import NotClosedFormError
from ptfprg.quadratic import Quadratic, random_quadratic


def diag(d, b=None, c=0.0):
    d = np.asarray(d, dtype=float)
    return Quadratic(np.diag(d), np.zeros(d.size) if b is None else b, c)


def test_linear_cases():
    assert oracles.sign_expectation(Quadratic.linear([1.0, 0.0], -1.0)) == \
        pytest.approx(1.0 - 2.0 * stats.norm.cdf(1.0), abs=1e-15)
    assert oracles.sign_expectation(Quadratic.linear([3.0, 4.0], 2.0)) == \
        pytest.approx(2.0 * stats.norm.cdf(0.4) - 1.0, abs=1e-15)
    assert oracles.sign_expectation(Quadratic.linear([0.0, 0.0], 1.0)) == 1.0
    # sgn(0) = +1
    assert oracles.sign_expectation(Quadratic.zero(3)) == 1.0
    assert oracles.sign_expectation(Quadratic.linear([0.0], -0.5)) == -1.0


def test_spherical_chi_square():
    val, method = oracles.sign_expectation(diag([1, 1, 0], c=-2.0), with_method=True)
    assert method == "spherical"
    assert val == pytest.approx(2 * math.exp(-1) - 1, abs=1e-14)
    n = 16
    assert oracles.sign_expectation(diag(np.ones(n), c=-n)) == \
        pytest.approx(2 * stats.chi2.sf(n, n) - 1, abs=1e-14)


def test_noncentral_chi_square_via_spectral_path():
    mu = np.array([0.5, -1.0, 0.3])
    # sum (x_i + mu_i)^2 - 4
    q = Quadratic(np.eye(3), 2 * mu, float(mu @ mu) - 4.0)
    val, method = oracles.sign_expectation(q, with_method=True)
    assert method == "spectral"
    assert val == pytest.approx(2 * stats.ncx2.sf(4.0, 3, mu @ mu) - 1, abs=1e-8)


def test_product_against_one_dimensional_integral():
    A = np.zeros((2, 2))
    A[0, 1] = A[1, 0] = 0.5
    q = Quadratic(A, np.zeros(2), 0.25)
    # P(x1 x2 >= -c) = E_x1[Phi(c / |x1|)]
    half, _ = integrate.quad(lambda x: stats.norm.pdf(x) * stats.norm.cdf(0.25 / x),
                             0.0, np.inf, epsabs=1e-13)
    p = 2 * half
    assert oracles.sign_expectation(q) == pytest.approx(2 * p - 1, abs=1e-9)


def test_one_direction_closed_form():
    # -(x1 + 1)^2 + 2 >= 0  iff  |x1 + 1| <= sqrt(2)
    q = Quadratic(np.diag([-1.0, 0.0]), [-2.0, 0.0], 1.0)
    val, method = oracles.sign_expectation(q, with_method=True)
    assert method == "one_direction"
    p = stats.norm.cdf(math.sqrt(2) - 1) - stats.norm.cdf(-math.sqrt(2) - 1)
    assert val == pytest.approx(2 * p - 1, abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_dense_against_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    q = random_quadratic(rng, 6)
    X = np.random.default_rng(100 + seed).standard_normal((1_000_000, 6))
    mc = float(np.mean(np.where(q(X) >= 0, 1.0, -1.0)))
    se = math.sqrt((1 - mc * mc) / X.shape[0])
    assert abs(oracles.sign_expectation(q) - mc) <= 5 * se


small = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@st.composite
def small_quadratics(draw):
    n = draw(st.integers(1, 3))
    A = draw(hnp.arrays(np.float64, (n, n), elements=small))
    b = draw(hnp.arrays(np.float64, (n,), elements=small))
    return Quadratic(A, b, draw(small))


@settings(max_examples=25)
@given(small_quadratics())
@example(Quadratic(np.zeros((1, 1)), np.array([3.79674589e-164]), 0.0))
@example(Quadratic(np.array([[3.79674589e-164]]), np.zeros(1), 0.0))
def test_negation_symmetry(q):
    try:
        val = oracles.sign_expectation(q)
        neg = oracles.sign_expectation(-q)
    except NotClosedFormError:
        return
    # the zero set of a nonzero quadratic is Gaussian-null, so only q = 0 breaks symmetry
    if q.is_linear() and not np.any(q.b) and q.c == 0.0:
        assert val == neg == 1.0
    else:
        assert neg == pytest.approx(-val, abs=2e-6)


@given(small_quadratics())
def test_canonical_form_reproduces_mean_and_variance(q):
    lam, mu, sigma, c0 = oracles.canonical_form(q)
    mean = float(np.trace(q.A) + q.c)
    var = 2 * float(np.sum(q.A * q.A)) + float(q.b @ q.b)
    assert float(np.sum(lam * (1 + mu * mu)) + c0) == pytest.approx(mean, rel=1e-8, abs=1e-8)
    assert float(np.sum(2 * lam ** 2 + 4 * lam ** 2 * mu ** 2) + sigma ** 2) == \
        pytest.approx(var, rel=1e-8, abs=1e-8)


def test_boundary_sensitivity():
    sq = diag([1.0, 0.0])
    assert oracles.sign_expectation(sq) == 1.0
    assert oracles.is_boundary_sensitive(sq, 1.0)
    assert not oracles.is_boundary_sensitive(diag([1.0, 0.0], c=1.0), 1.0)
    assert not oracles.is_boundary_sensitive(Quadratic.linear([1.0, 0.0]), 0.0)


def test_inf_abs():
    assert oracles.inf_abs(diag([1.0, 2.0], c=3.0)) == 3.0
    assert oracles.inf_abs(diag([-1.0, -2.0], c=-3.0)) == 3.0
    assert oracles.inf_abs(diag([1.0, -1.0], c=5.0)) == 0.0
    assert oracles.inf_abs(Quadratic.linear([0.0, 0.0], -2.0)) == 2.0
