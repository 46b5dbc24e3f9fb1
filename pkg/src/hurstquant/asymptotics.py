"""Hermite machinery, asymptotic variance constants and convergence-rate tables.

The asymptotic variance of sqrt(n)(H_hat - H) is a double series over lags i
and Hermite degrees j:

    sigma^2 = sum_{|i| <= i_max} sum_{j=1}^{j_max} w_j  B' R(i, j) B,
    R(i, j)[m1, m2] = rho^{a^m1, a^m2}(i)^{2j},

with weights w_j that depend on the statistic:

    quantile combination:  w_j = (1/(2j)!) (sum_k c_k pi_k H_{2j-1}(q_k) / q_k)^2
    trimmed mean:          w_j = (1/(2j)!) (int H_{2j-1}(q) q^{alpha-1} dp / int q^alpha dp)^2

q = Phi^{-1}((1 + p)/2). alpha = 0 denotes the log transform.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate
from scipy.special import ndtr, owens_t

from .estimators import regression_design
from .filters import Filter, dilate, parse_filter
from .models import gamma
from .quantiles import QuantileScheme, TrimSpec, absnormal_quantile

I_MAX = 200
J_MAX = 150
# |H_k(t)| / sqrt(k!) <= 1.09 exp(t^2/4), so Gaussian-weighted integrands are
# below exp(-t^2/4) ~ 1e-174 past this point
Q_CUTOFF = 40.0

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(t):
    return np.exp(-0.5 * np.square(t)) / _SQRT2PI


# ---------------------------------------------------------------------------
# Hermite polynomials (probabilists' convention)


def hermite_eval(j: int, t):
    """H_j(t) by the recurrence H_{k+1} = t H_k - k H_{k-1}."""
    if j < 0:
        raise ValueError("degree must be >= 0")
    t = np.asarray(t, dtype=float)
    h_prev, h = np.ones_like(t), t.copy()
    if j == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for k in range(1, j):
        h_prev, h = h, t * h - k * h_prev
    return h if h.ndim else float(h)


def hermite_normalized(max_degree: int, t) -> np.ndarray:
    """Rows k = 0..max_degree of H_k(t) / sqrt(k!); stable for large k."""
    t = np.asarray(t, dtype=float)
    out = np.empty((max_degree + 1,) + t.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = t
    for k in range(1, max_degree):
        out[k + 1] = (t * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


def hermite_coeff_hp(p: float, j: int) -> float:
    """j-th Hermite coefficient of h_p(t) = 1{|t| <= q} - p, q = Phi^{-1}((1+p)/2).

    Zero for j = 0 and odd j; -2 H_{j-1}(q) phi(q) for even j >= 2.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if j < 0:
        raise ValueError("j must be >= 0")
    if j == 0 or j % 2 == 1:
        return 0.0
    q = float(absnormal_quantile(p))
    return float(-2.0 * hermite_eval(j - 1, q) * _phi(q))


# ---------------------------------------------------------------------------
# Correlation structure of the dilated filters


def dilations(f: Filter, M: int) -> list:
    return [dilate(f, m) for m in range(1, M + 1)]


@functools.lru_cache(maxsize=64)
def _rho_stack(f: Filter, M: int, H: float, i_max: int) -> np.ndarray:
    """rho^{a^m1, a^m2}(i) for i = 0..i_max, shape (i_max+1, M, M)."""
    fs = dilations(f, M)
    lags = np.arange(i_max + 1)
    g0 = np.array([gamma(a, a, 0, H) for a in fs])
    out = np.empty((i_max + 1, M, M))
    for r, a in enumerate(fs):
        for s, b in enumerate(fs):
            out[:, r, s] = gamma(a, b, lags, H) / math.sqrt(g0[r] * g0[s])
    return out


def R_matrix(i: int, j: int, filters, H: float) -> np.ndarray:
    """M x M matrix with entries rho^{a^m1, a^m2}(i)^{2j} for a list of filters."""
    M = len(filters)
    out = np.empty((M, M))
    g0 = [gamma(a, a, 0, H) for a in filters]
    for r, a in enumerate(filters):
        for s, b in enumerate(filters):
            out[r, s] = (gamma(a, b, i, H) / math.sqrt(g0[r] * g0[s])) ** (2 * j)
    return out


def quadratic_form_series(f: Filter, M: int, H: float, i_max: int = I_MAX, j_max: int = J_MAX,
                          symmetric: bool = True) -> np.ndarray:
    """S_j = sum_{|i| <= i_max} B' R(i, j) B for j = 1..j_max.

    With ``symmetric`` the summand at -i is taken equal to the one at i (R(-i) = R(i)').
    """
    return _quadratic_form_series(f, M, float(H), i_max, j_max, symmetric).copy()


@functools.lru_cache(maxsize=64)
def _quadratic_form_series(f, M, H, i_max, j_max, symmetric):
    B = regression_design(M).B
    rho = _rho_stack(f, M, H, i_max)
    if symmetric:
        rho_all, weight = rho, np.full(i_max + 1, 2.0)
        weight[0] = 1.0
    else:
        neg = np.transpose(rho[1:][::-1], (0, 2, 1))
        rho_all = np.concatenate([neg, rho])
        weight = np.ones(rho_all.shape[0])
    r2 = rho_all**2
    power = r2.copy()
    out = np.empty(j_max)
    for j in range(j_max):
        per_lag = np.einsum("m,imn,n->i", B, power, B)
        out[j] = np.dot(weight, per_lag)
        power *= r2
    return out


def _lag_terms(f, M, H, i_max, weights):
    """sum_j w_j B'R(i,j)B per lag i >= 0 (for the i-truncation diagnostic)."""
    B = regression_design(M).B
    r2 = _rho_stack(f, M, H, i_max) ** 2
    power = r2.copy()
    out = np.zeros(i_max + 1)
    for w in weights:
        out += w * np.einsum("m,imn,n->i", B, power, B)
        power *= r2
    return out


# ---------------------------------------------------------------------------
# Variance constants


@dataclass(frozen=True)
class VarianceConfig:
    """Inputs of an asymptotic variance constant; alpha = 0 is the log variant."""

    filter: Filter
    M: int
    H: float
    statistic: Union[QuantileScheme, TrimSpec]
    alpha: float = 0.0
    i_max: int = I_MAX
    j_max: int = J_MAX

    def __post_init__(self):
        if isinstance(self.filter, str):
            object.__setattr__(self, "filter", parse_filter(self.filter))
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if not 0.0 < self.H < 1.0:
            raise ValueError("H must lie in (0, 1)")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0 (0 encodes the log transform)")
        if self.i_max < 0 or self.j_max < 1:
            raise ValueError("truncation bounds must be positive")


@dataclass(frozen=True)
class VarianceResult:
    value: float
    last_j_term: float
    last_i_term: float
    clt_valid: bool

    def __float__(self) -> float:
        return self.value


def _check_clt(cfg: VarianceConfig) -> bool:
    ok = cfg.filter.order > cfg.H + 0.25
    if not ok:
        warnings.warn(
            f"filter order {cfg.filter.order} <= H + 1/4 = {cfg.H + 0.25:g}: the series "
            "is not the limiting variance of sqrt(n)(H_hat - H)",
            RuntimeWarning,
            stacklevel=3,
        )
    return ok


def quantile_weights(scheme: QuantileScheme, alpha: float, j_max: int) -> np.ndarray:
    """w_j = (1/(2j)!) (sum_k c_k pi_k^alpha H_{2j-1}(q_k) / q_k)^2, j = 1..j_max."""
    q = absnormal_quantile(np.asarray(scheme.p))
    c = np.asarray(scheme.c)
    pi = q**alpha / np.dot(c, q**alpha)
    hn = hermite_normalized(2 * j_max - 1, q)[1::2]  # degrees 1, 3, ..., 2j_max-1
    j = np.arange(1, j_max + 1)
    # H_{2j-1}^2 / (2j)! = (H_{2j-1}/sqrt((2j-1)!))^2 / (2j)
    return (hn @ (c * pi / q)) ** 2 / (2 * j)


@functools.lru_cache(maxsize=256)
def trimmed_weights(beta1: float, beta2: float, alpha: float, j_max: int, rtol: float = 1e-9) -> np.ndarray:
    """w_j = (1/(2j)!) (int H_{2j-1}(q) q^{alpha-1} dp / int q^alpha dp)^2, p in [b1, 1-b2].

    Integrals are taken in q (dp = 2 phi(q) dq) by adaptive vector quadrature.
    """
    q_lo = float(absnormal_quantile(beta1)) if beta1 > 0 else 0.0
    q_hi = float(absnormal_quantile(1.0 - beta2)) if beta2 > 0 else Q_CUTOFF
    q_hi = min(q_hi, Q_CUTOFF)

    def integrand(t):
        hn = hermite_normalized(2 * j_max - 1, t)[1::2]
        return hn * (2.0 * _phi(t) * t ** (alpha - 1.0)) if t > 0 else hn * 0.0

    num, _ = integrate.quad_vec(integrand, q_lo, q_hi, epsrel=rtol, epsabs=1e-13, norm="max", limit=2000)
    if alpha == 0:
        den = 1.0 - beta1 - beta2
    else:
        den, _ = integrate.quad(lambda t: t**alpha * 2.0 * _phi(t), q_lo, q_hi, epsrel=1e-12, epsabs=0.0, limit=200)
    j = np.arange(1, j_max + 1)
    return (num / den) ** 2 / (2 * j)


def _series_value(cfg: VarianceConfig, weights: np.ndarray) -> VarianceResult:
    ok = _check_clt(cfg)
    S = _quadratic_form_series(cfg.filter, cfg.M, float(cfg.H), cfg.i_max, cfg.j_max, True)
    terms = weights * S
    lag = _lag_terms(cfg.filter, cfg.M, float(cfg.H), cfg.i_max, weights)
    last_i = float(2.0 * lag[-1]) if cfg.i_max > 0 else float(lag[0])
    return VarianceResult(float(np.sum(terms)), float(abs(terms[-1])), abs(last_i), ok)


def sigma2_alpha(cfg: VarianceConfig) -> VarianceResult:
    """Truncated-series variance constant for a quantile-combination estimator."""
    if not isinstance(cfg.statistic, QuantileScheme):
        raise TypeError("sigma2_alpha needs a QuantileScheme; use sigma2_alpha_tm for trimming")
    return _series_value(cfg, quantile_weights(cfg.statistic, cfg.alpha, cfg.j_max))


def sigma2_alpha_tm(cfg: VarianceConfig) -> VarianceResult:
    """Truncated-series variance constant for a trimmed-mean estimator."""
    if not isinstance(cfg.statistic, TrimSpec):
        raise TypeError("sigma2_alpha_tm needs a TrimSpec")
    t = cfg.statistic
    return _series_value(cfg, trimmed_weights(t.beta1, t.beta2, float(cfg.alpha), cfg.j_max))


def asymptotic_variance(cfg: VarianceConfig) -> VarianceResult:
    if isinstance(cfg.statistic, QuantileScheme):
        return sigma2_alpha(cfg)
    return sigma2_alpha_tm(cfg)


# ---------------------------------------------------------------------------
# Closed-form Hermite sum for quantile schemes


def _owen_term(h: float, k: float, r: float, s: float) -> float:
    if h == 0.0:
        # limit of T(h, (k - r h)/(h s)) as h -> 0
        return 0.25 * math.copysign(1.0, k) if k != 0.0 else 0.0
    return float(owens_t(h, (k - r * h) / (h * s)))


def bivariate_normal_cdf(h: float, k: float, r: float) -> float:
    """P(Y1 <= h, Y2 <= k) for standard normals with correlation r (Owen's T form)."""
    if r >= 1.0:
        return float(ndtr(min(h, k)))
    if r <= -1.0:
        return float(max(ndtr(h) + ndtr(k) - 1.0, 0.0))
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(r) / (2.0 * math.pi)
    s = math.sqrt((1.0 - r) * (1.0 + r))
    val = 0.5 * (ndtr(h) + ndtr(k)) - _owen_term(h, k, r, s) - _owen_term(k, h, r, s)
    # compare signs directly: h * k can underflow to zero
    if (h < 0 < k) or (k < 0 < h) or ((h == 0 or k == 0) and h + k < 0):
        val -= 0.5
    return float(val)


def _abs_box_prob(q1: float, q2: float, r: float) -> float:
    """P(|Y1| <= q1, |Y2| <= q2)."""
    F = bivariate_normal_cdf
    return F(q1, q2, r) - F(-q1, q2, r) - F(q1, -q2, r) + F(-q1, -q2, r)


def hp_covariance(p1: float, p2: float, r: float) -> float:
    """E h_p1(Y1) h_p2(Y2) = sum_j c_2j(p1) c_2j(p2) r^{2j} / (2j)! in closed form."""
    q1 = float(absnormal_quantile(p1))
    q2 = float(absnormal_quantile(p2))
    return _abs_box_prob(q1, q2, r) - p1 * p2


def sigma2_alpha_closed(cfg: VarianceConfig) -> float:
    """Quantile-scheme constant with the Hermite j-series summed exactly.

    Uses E h_p1(Y1) h_p2(Y2) = P(|Y1| <= q1, |Y2| <= q2) - p1 p2; only the lag
    sum is truncated (|i| <= i_max). Serves as a reference for the j-truncation.
    """
    scheme = cfg.statistic
    if not isinstance(scheme, QuantileScheme):
        raise TypeError("closed form available for quantile schemes only")
    q = absnormal_quantile(np.asarray(scheme.p))
    c = np.asarray(scheme.c)
    pi = q**cfg.alpha / np.dot(c, q**cfg.alpha)
    w = c * pi / q / (2.0 * _phi(q))
    B = regression_design(cfg.M).B
    rho = _rho_stack(cfg.filter, cfg.M, float(cfg.H), cfg.i_max)
    total = 0.0
    K = len(scheme.p)
    for i in range(cfg.i_max + 1):
        lag_weight = 1.0 if i == 0 else 2.0
        acc = 0.0
        for m1 in range(cfg.M):
            for m2 in range(cfg.M):
                r = float(rho[i, m1, m2])
                s = 0.0
                for k1 in range(K):
                    for k2 in range(K):
                        s += w[k1] * w[k2] * hp_covariance(scheme.p[k1], scheme.p[k2], r)
                acc += B[m1] * B[m2] * s
        total += lag_weight * acc
    return total


# ---------------------------------------------------------------------------
# Convergence-rate table (slowly varying factor L = 1)

_EQ_TOL = 1e-12


@dataclass(frozen=True)
class Rate:
    label: str
    value: float


def _bahadur_rate(at: float, tau: int, n: float) -> Rate:
    ln = math.log(n)
    if at > 1 + _EQ_TOL:
        return Rate("n^-3/4 log(n)^3/4", n**-0.75 * ln**0.75)
    if abs(at - 1) <= _EQ_TOL:
        # L_tau(n) = sum_{|i|<=n} |rho(i)|^tau grows like log n when alpha*tau = 1
        return Rate("n^-3/4 log(n)^3/2", n**-0.75 * ln**1.5)
    if at > 2.0 / 3.0 + _EQ_TOL:
        return Rate("n^(-1/2-alpha*tau/4) log(n)^(tau/4+1/2)", n ** (-0.5 - at / 4) * ln ** (tau / 4 + 0.5))
    return Rate("n^(-alpha*tau) log(n)^tau", n ** (-at) * ln**tau)


def _moment_rate(at: float, tau: int, n: float) -> Rate:
    ln = math.log(n)
    if at > 1 + _EQ_TOL:
        return Rate("n^-1/2 log(n)^1/2", n**-0.5 * ln**0.5)
    if abs(at - 1) <= _EQ_TOL:
        return Rate("n^-1/2 log(n)", n**-0.5 * ln)
    return Rate("n^(-alpha*tau/2) log(n)^(tau/2)", n ** (-at / 2) * ln ** (tau / 2))


def rate_table(nu: int, H: float, n: float) -> dict:
    """Rates for filtered series of order nu: correlation decay alpha = 2nu - 2H, Hermite rank 2.

    Returns Rate entries keyed 'r_n' (Bahadur remainder), 'y_n' (sample-mean
    deviation), 'v_n' (MSE variance term) and 'h_rate' (almost sure rate of
    H_hat - H, bias term excluded).
    """
    if nu < 1:
        raise ValueError("filter order must be >= 1")
    if not 0.0 < H < 1.0:
        raise ValueError("H must lie in (0, 1)")
    if n < 2:
        raise ValueError("n must be >= 2")
    tau = 2
    at = (2.0 * nu - 2.0 * H) * tau
    ln = math.log(n)
    if nu > H + 0.25 + _EQ_TOL:
        v = Rate("n^-1", 1.0 / n)
        h = Rate("n^-1/2 log(n)", n**-0.5 * ln)
    elif abs(H - 0.75) <= _EQ_TOL:
        v = Rate("n^-1 log(n)", ln / n)
        h = Rate("n^-1/2 log(n)^3/2", n**-0.5 * ln**1.5)
    else:
        v = Rate("n^-4(1-H)", n ** (-4.0 * (1.0 - H)))
        h = Rate("n^-2(1-H) log(n)", n ** (-2.0 * (1.0 - H)) * ln)
    return {
        "r_n": _bahadur_rate(at, tau, n),
        "y_n": _moment_rate(at, tau, n),
        "v_n": v,
        "h_rate": h,
    }
