import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hurstquant.filters import dilate, named_filter
from hurstquant.models import (
    ProcessModel,
    cross_covariance,
    delta_n,
    filtered_cov_matrix,
    gamma,
    kappa,
    model_from_dict,
    rho,
)

INC1, INC2, DB4 = (named_filter(k) for k in ("inc1", "inc2", "db4"))
HS = [0.1 * k for k in range(1, 10)]


def gamma_loops(a, b, j, H):
    """Double sum over (q, q') with |0|^{2H} = 0."""
    total = 0.0
    for q, aq in enumerate(a.coeffs):
        for qp, bq in enumerate(b.coeffs):
            lag = abs(q - qp + j)
            total += aq * bq * (lag ** (2 * H) if lag else 0.0)
    return -0.5 * total


def filter_matrix(f, n, start):
    """Rows i = start..n (1-based) of X^f(i/n) as a linear map of (X(1/n), ..., X(1))."""
    rows = []
    for i in range(start, n + 1):
        row = np.zeros(n)
        for q, aq in enumerate(f.coeffs):
            row[i - q - 1] += aq
        rows.append(row)
    return np.array(rows)


@pytest.mark.parametrize("kind", ["fbm", "exp", "log"])
def test_variance_functions(kind):
    m = ProcessModel(kind, 0.7)
    assert m.v(0.0) == 0.0
    t = np.array([0.01, 0.3, 1.0, 2.5])
    np.testing.assert_array_equal(m.v(t), m.v(-t))
    assert np.all(m.v(t) > 0)


@pytest.mark.parametrize("kind", ["exp", "log"])
@pytest.mark.parametrize("t", [1e-4, 1e-6])
def test_small_t_expansion(kind, t):
    m = ProcessModel(kind, 0.8)
    assert abs(m.v(t) / t**1.6 - 1.0) < 10 * t**1.6
    assert abs(m.remainder(t)) < 10 * t**1.6


def test_fbm_remainder_zero_and_sigma2_rules():
    m = ProcessModel("fbm", 0.3, sigma2=2.5)
    np.testing.assert_array_equal(m.remainder([0.0, 0.5, 3.0]), 0.0)
    assert ProcessModel("exp", 0.3, sigma2=7.0).sigma2 == 1.0
    with pytest.raises(ValueError):
        ProcessModel("fbm", 1.0)
    with pytest.raises(ValueError):
        ProcessModel("gauss", 0.5)


def test_model_dict_round_trip():
    for m in (ProcessModel("fbm", 0.8, 2.0), ProcessModel("exp", 0.8), ProcessModel("log", 0.2)):
        assert model_from_dict(m.to_dict()) == m


@pytest.mark.parametrize("H", [0.05, 0.3, 0.5, 0.77, 0.95])
def test_gamma_inc1_lag0_is_one(H):
    assert gamma(INC1, INC1, 0, H) == pytest.approx(1.0, abs=1e-15)


def test_gamma_examples():
    assert gamma(INC1, INC1, 1, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert gamma(INC1, INC1, 1, 0.8) == pytest.approx(0.515716566510398059, rel=1e-14)
    assert gamma(INC1, INC1, 1, 0.8) == pytest.approx(gamma_loops(INC1, INC1, 1, 0.8), rel=1e-14)


@settings(max_examples=80, deadline=None)
@given(
    fa=st.sampled_from(["inc1", "inc2", "db4"]),
    fb=st.sampled_from(["inc1", "inc2", "db4"]),
    ma=st.integers(1, 4),
    mb=st.integers(1, 4),
    j=st.integers(-30, 30),
    H=st.floats(0.02, 0.98),
)
def test_gamma_matches_double_sum(fa, fb, ma, mb, j, H):
    a, b = dilate(named_filter(fa), ma), dilate(named_filter(fb), mb)
    ref = gamma_loops(a, b, j, H)
    assert gamma(a, b, j, H) == pytest.approx(ref, rel=1e-11, abs=1e-13)
    # swapping the filters reverses the lag
    assert gamma(b, a, -j, H) == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_gamma_vectorized_in_j():
    js = np.arange(-5, 6)
    np.testing.assert_allclose(gamma(INC2, INC2, js, 0.4), [gamma(INC2, INC2, int(j), 0.4) for j in js])
    np.testing.assert_allclose(gamma(INC2, INC2, js, 0.4), gamma(INC2, INC2, -js, 0.4))


@pytest.mark.parametrize("f", [INC1, INC2, DB4], ids=str)
@pytest.mark.parametrize("H", HS)
def test_dilation_identity(f, H):
    g0 = gamma(f, f, 0, H)
    for m in range(1, 6):
        am = dilate(f, m)
        assert gamma(am, am, 0, H) == pytest.approx(m ** (2 * H) * g0, rel=1e-10)


def test_rho_examples():
    assert rho(INC1, INC1, 0, 0.3) == pytest.approx(1.0, abs=1e-15)
    assert rho(INC1, INC1, 1, 0.5) == pytest.approx(0.0, abs=1e-15)
    ratio = abs(rho(INC2, INC2, 50, 0.8)) / abs(rho(INC2, INC2, 25, 0.8))
    assert ratio == pytest.approx(2 ** -2.4, rel=0.10)


@settings(max_examples=60, deadline=None)
@given(
    fa=st.sampled_from(["inc1", "inc2", "db4"]),
    fb=st.sampled_from(["inc1", "inc2", "db4"]),
    ma=st.integers(1, 5),
    mb=st.integers(1, 5),
    j=st.integers(-50, 50),
    H=st.floats(0.02, 0.98),
)
def test_rho_bounded(fa, fb, ma, mb, j, H):
    assert abs(rho(dilate(named_filter(fa), ma), dilate(named_filter(fb), mb), j, H)) <= 1 + 1e-12


@pytest.mark.parametrize("f", [INC1, INC2, DB4], ids=str)
@pytest.mark.parametrize("H", [0.2, 0.5, 0.8])
def test_rho_decay_law(f, H):
    j = np.arange(10, 1001)
    scaled = np.abs(rho(f, f, j, H)) * j ** (2 * f.order - 2 * H)
    assert np.all(np.isfinite(scaled))
    # bounded: the tail settles to the leading constant
    assert scaled.max() < 2.0 * scaled[-100:].mean() + 1e-12


@pytest.mark.parametrize("f, H", [(INC1, 0.6), (INC2, 0.8), (DB4, 0.9)], ids=str)
def test_squared_correlations_summable(f, H):
    j = np.arange(1, 100_001, dtype=float)
    r2 = rho(f, f, j, H) ** 2
    # increments of the symmetric partial sums over |j| <= N
    assert 2 * r2[-1] < 1e-8
    assert np.all(np.diff(r2[1000:]) <= 0)
    # remaining tail bounded by the integral of the power law
    p = 2 * (2 * f.order - 2 * H)
    tail = 2 * r2[-1] * j[-1] / (p - 1)
    assert tail < 1e-3 * (1 + 2 * r2.sum())


def test_delta_fbm_zero():
    m = ProcessModel("fbm", 0.8, 3.0)
    for a in (INC1, DB4):
        for j in (0, 1, 7):
            assert delta_n(a, a, j, m, 100) == 0.0


def test_delta_vanishes():
    exp = ProcessModel("exp", 0.5)
    assert abs(delta_n(INC1, INC1, 0, exp, 4096)) < abs(delta_n(INC1, INC1, 0, exp, 256))
    # analytically -expm1(-1/n)*n - 1 at H = 1/2
    assert delta_n(INC1, INC1, 0, exp, 256) == pytest.approx(-0.00195058435007745609, rel=1e-9)
    lg = ProcessModel("log", 0.5)
    assert delta_n(INC1, INC1, 0, lg, 10**6) == pytest.approx(-4.99999666666917e-07, rel=1e-6)
    assert abs(delta_n(INC1, INC1, 0, lg, 10**6)) < 1e-3


def test_delta_undefined_when_gamma_vanishes():
    assert math.isnan(delta_n(INC1, INC1, 1, ProcessModel("exp", 0.5), 100))


@pytest.mark.parametrize("kind", ["exp", "log"])
@pytest.mark.parametrize("j", [0, 1, 3])
def test_delta_reconstructs_exact_covariance(kind, j):
    m = ProcessModel(kind, 0.7)
    n = 200
    for a, b in [(INC2, INC2), (DB4, dilate(DB4, 2))]:
        exact = cross_covariance(a, b, j, m, n)
        approx = m.sigma2 * n ** (-1.4) * gamma(a, b, j, 0.7) * (1 + delta_n(a, b, j, m, n))
        assert approx == pytest.approx(exact, rel=1e-10)


def test_kappa():
    m = ProcessModel("fbm", 0.8, 2.0)
    assert kappa(DB4, m, 1000) == pytest.approx(2.0 * 1000 ** -1.6 * gamma(DB4, DB4, 0, 0.8))


def test_filtered_cov_brownian_identity():
    n = 64
    C = filtered_cov_matrix([INC1], ProcessModel("fbm", 0.5), n)
    np.testing.assert_allclose(C, np.eye(n - 1) / n, atol=1e-15)


def test_filtered_cov_dilation_ratio():
    H, n = 0.65, 128
    C = filtered_cov_matrix([INC1, dilate(INC1, 2)], ProcessModel("fbm", H), n, length=20)
    d = np.diag(C)
    np.testing.assert_allclose(d[20:] / d[:20], 2 ** (2 * H), rtol=1e-12)


@pytest.mark.parametrize("kind, H, n", [("exp", 0.7, 512), ("fbm", 0.3, 64), ("log", 0.85, 80)])
def test_filtered_cov_matches_path_covariance(kind, H, n):
    model = ProcessModel(kind, H)
    filters = [dilate(INC2, m) for m in (1, 2, 3)] if n < 100 else [INC1, dilate(DB4, 2)]
    ell = max(f.ell for f in filters)
    F = np.vstack([filter_matrix(f, n, ell + 1) for f in filters])
    ref = F @ model.path_covariance(n) @ F.T
    C = filtered_cov_matrix(filters, model, n)
    np.testing.assert_allclose(C, ref, rtol=1e-9, atol=1e-11 * np.abs(ref).max())
    w = np.linalg.eigvalsh(C)
    assert w.min() >= -1e-8 * np.trace(C)
