"""Hurst exponent estimators built on dilated filters and log-scale regression.

For m = 1..M the path is filtered with the m-fold dilation of a filter.
A scale statistic is computed per m and regressed on log m:

* power transform:  response_m = log S(|X^{a^m}|^alpha),  H = B.response / alpha
* log transform:    response_m = S(log|X^{a^m}|),         H = B.response

where S is a convex quantile combination or a trimmed mean and
B = A / ||A||^2, A_m = log m - mean(log m).
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .filters import Filter, FilterError, apply_filter, dilate, named_filter, parse_filter
from .quantiles import QuantileScheme, TrimSpec, quantile_combination, trimmed_mean

log = logging.getLogger(__name__)

AUTO_FILTER = "auto"
# a* switches from inc1 to db4 at this Hurst value
ASTAR_SWITCH = 0.75


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegressionDesign:
    M: int
    A: np.ndarray = field(init=False, repr=False, compare=False)
    B: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        logm = np.log(np.arange(1, self.M + 1))
        A = logm - logm.mean()
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", A / np.dot(A, A))

    @property
    def log_m(self) -> np.ndarray:
        return np.log(np.arange(1, self.M + 1))


@functools.lru_cache(maxsize=64)
def regression_design(M: int) -> RegressionDesign:
    return RegressionDesign(M)


@dataclass(frozen=True)
class EstimatorConfig:
    """Filter (or 'auto' for a*), number of dilations M, statistic and transform.

    ``statistic`` is a QuantileScheme or a TrimSpec; ``alpha`` is the power
    exponent, or None for the log transform.
    """

    statistic: Union[QuantileScheme, TrimSpec]
    alpha: Optional[float] = None
    filter: Union[Filter, str] = AUTO_FILTER
    M: int = 5
    name: str = ""

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not isinstance(self.statistic, (QuantileScheme, TrimSpec)):
            raise TypeError("statistic must be a QuantileScheme or TrimSpec")
        if isinstance(self.filter, str) and self.filter != AUTO_FILTER:
            object.__setattr__(self, "filter", parse_filter(self.filter))

    @property
    def transform(self) -> str:
        return "log" if self.alpha is None else "power"

    def with_filter(self, f: Filter) -> "EstimatorConfig":
        return EstimatorConfig(self.statistic, self.alpha, f, self.M, self.name)

    def describe(self) -> dict:
        stat = self.statistic
        d = {
            "name": self.name,
            "filter": str(self.filter),
            "M": self.M,
            "transform": self.transform,
            "alpha": "" if self.alpha is None else self.alpha,
        }
        if isinstance(stat, QuantileScheme):
            d["statistic"] = "quantile"
            d["p"] = ",".join(f"{v:g}" for v in stat.p)
            d["c"] = ",".join(f"{v:g}" for v in stat.c)
        else:
            d["statistic"] = "trimmed_mean"
            d["beta1"] = stat.beta1
            d["beta2"] = stat.beta2
        return d


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    h_hat: float
    per_scale_stat: np.ndarray
    residuals: np.ndarray
    config: EstimatorConfig
    filter_used: Filter
    pilot: Optional[float] = None
    excluded_zeros: int = 0

    def as_row(self) -> dict:
        row = {"h_hat": repr(float(self.h_hat))}
        row.update(self.config.describe())
        row["filter_used"] = str(self.filter_used)
        row["pilot"] = "" if self.pilot is None else repr(float(self.pilot))
        row["excluded_zeros"] = self.excluded_zeros
        row["per_scale_stat"] = " ".join(repr(float(v)) for v in self.per_scale_stat)
        row["residuals"] = " ".join(repr(float(v)) for v in self.residuals)
        return row


def astar(h: float) -> Filter:
    """Recommended filter: inc1 below H = 3/4, db4 otherwise."""
    return named_filter("inc1") if h < ASTAR_SWITCH else named_filter("db4")


def _statistic(values: np.ndarray, stat) -> float:
    if isinstance(stat, QuantileScheme):
        return quantile_combination(values, stat)
    return trimmed_mean(values, stat)


def _estimate_fixed(x: np.ndarray, cfg: EstimatorConfig, f: Filter) -> tuple:
    design = regression_design(cfg.M)
    need = cfg.M * f.ell + 1
    if x.size <= need:
        raise EstimationError(
            f"path length {x.size} too short for M={cfg.M} dilations of a filter "
            f"with l={f.ell} (need n > {need})"
        )
    response = np.empty(cfg.M)
    zeros = 0
    for m in range(1, cfg.M + 1):
        y = np.abs(apply_filter(dilate(f, m), x))
        if cfg.alpha is None:
            nz = y > 0
            if not nz.all():
                zeros += int(y.size - nz.sum())
                y = y[nz]
                if y.size == 0:
                    raise EstimationError(f"all filtered values vanish at scale m={m}")
            response[m - 1] = _statistic(np.log(y), cfg.statistic)
        else:
            s = _statistic(y**cfg.alpha, cfg.statistic)
            if not s > 0:
                raise EstimationError(
                    f"statistic is {s!r} at scale m={m}; log of a non-positive value"
                )
            response[m - 1] = math.log(s)
    slope = float(np.dot(design.B, response))
    h = slope if cfg.alpha is None else slope / cfg.alpha
    fitted = response.mean() + slope * design.A
    if zeros:
        log.warning("excluded %d zero filtered values under log transform", zeros)
    return h, response, response - fitted, zeros


def pilot_estimate(x, M: int = 5) -> float:
    """Robust pilot H: median-log estimator with db4."""
    x = np.asarray(getattr(x, "values", x), dtype=float)
    cfg = EstimatorConfig(QuantileScheme.single(0.5), None, named_filter("db4"), M, "pilot")
    return _estimate_fixed(x, cfg, cfg.filter)[0]


def estimate_h(x, cfg: EstimatorConfig) -> EstimatorReport:
    """Estimate H from a sample path X(i/n), i = 1..n.

    With ``cfg.filter == 'auto'`` the filter is a* evaluated at a robust
    pilot estimate (median-log estimator with db4).
    """
    x = np.asarray(getattr(x, "values", x), dtype=float)
    pilot = None
    if cfg.filter == AUTO_FILTER:
        pilot = pilot_estimate(x, cfg.M)
        f = astar(pilot)
    else:
        f = cfg.filter
    h, resp, resid, zeros = _estimate_fixed(x, cfg, f)
    return EstimatorReport(h, resp, resid, cfg, f, pilot, zeros)


def quadratic_variations_config(filter: Union[Filter, str] = AUTO_FILTER, M: int = 5) -> EstimatorConfig:
    return EstimatorConfig(TrimSpec(0.0, 0.0), 2.0, filter, M, "quadratic_variations")


def estimate_h_quadratic_variations(x, filter: Union[Filter, str] = AUTO_FILTER, M: int = 5) -> EstimatorReport:
    """Power-2 transform with the untrimmed mean."""
    return estimate_h(x, quadratic_variations_config(filter, M))


# ---------------------------------------------------------------------------
# Whittle estimator for fGn increments

WHITTLE_KMAX = 200
WHITTLE_BOUNDS = (0.01, 0.99)
WHITTLE_XTOL = 1e-6


@functools.lru_cache(maxsize=16)
def _whittle_grid(n: int, kmax: int):
    nf = (n - 1) // 2
    lam = 2.0 * np.pi * np.arange(1, nf + 1) / n
    k = np.arange(-kmax, kmax + 1)
    log_abs = np.log(np.abs(2.0 * np.pi * k[:, None] + lam[None, :]))
    # midpoint tail estimate for |k| > kmax
    tail_plus = 2.0 * np.pi * (kmax + 0.5) + lam
    tail_minus = 2.0 * np.pi * (kmax + 0.5) - lam
    return lam, log_abs, tail_plus, tail_minus


def fgn_spectral_density(H: float, lam, kmax: int = WHITTLE_KMAX) -> np.ndarray:
    """Unit-variance fGn spectral density at frequencies lam in (0, pi].

    f(lam) = 2 sin(pi H) Gamma(2H+1) (1 - cos lam) sum_k |2 pi k + lam|^{-2H-1},
    normalized so that int_{-pi}^{pi} f = 1; the sum is truncated at |k| <= kmax
    with the remainder replaced by its integral from kmax + 1/2.
    """
    lam = np.asarray(lam, dtype=float)
    d = 2.0 * H + 1.0
    k = np.arange(-kmax, kmax + 1)
    s = np.sum(np.abs(2.0 * np.pi * k[:, None] + lam[None, :]) ** (-d), axis=0)
    s += _tail(d, 2.0 * np.pi * (kmax + 0.5) + lam) + _tail(d, 2.0 * np.pi * (kmax + 0.5) - lam)
    c = 2.0 * math.sin(math.pi * H) * math.exp(gammaln(d)) / (2.0 * math.pi)
    return c * (1.0 - np.cos(lam)) * s


def _tail(d: float, start) -> np.ndarray:
    # sum_{k > K} (2 pi k + lam)^{-d} ~ int_{K+1/2}^inf (2 pi x + lam)^{-d} dx
    return start ** (1.0 - d) / (2.0 * np.pi * (d - 1.0))


def _whittle_contrast(H: float, lam, log_abs, tail_p, tail_m, periodogram) -> float:
    d = 2.0 * H + 1.0
    s = np.exp(-d * log_abs).sum(axis=0) + _tail(d, tail_p) + _tail(d, tail_m)
    f = (1.0 - np.cos(lam)) * s
    # the scale is profiled out, so constant factors of f drop out
    return math.log(np.mean(periodogram / f)) + np.mean(np.log(f))


def periodogram(z: np.ndarray) -> tuple:
    n = z.size
    nf = (n - 1) // 2
    lam = 2.0 * np.pi * np.arange(1, nf + 1) / n
    I = np.abs(np.fft.fft(z)[1 : nf + 1]) ** 2 / (2.0 * np.pi * n)
    return lam, I


def estimate_h_whittle(x, kmax: int = WHITTLE_KMAX) -> float:
    """Whittle estimate of H from the increments of a path (fGn model).

    Minimizes log(mean(I / f_H)) + mean(log f_H) over H in (0.01, 0.99);
    the innovation scale is profiled out analytically.
    """
    x = np.asarray(getattr(x, "values", x), dtype=float)
    z = np.diff(x, prepend=0.0)
    n = z.size
    if n < 64:
        raise EstimationError(f"Whittle estimator needs n >= 64, got {n}")
    _, I = periodogram(z)
    lam, log_abs, tp, tm = _whittle_grid(n, kmax)
    res = minimize_scalar(
        _whittle_contrast,
        bounds=WHITTLE_BOUNDS,
        args=(lam, log_abs, tp, tm, I),
        method="bounded",
        options={"xatol": WHITTLE_XTOL, "maxiter": 500},
    )
    if not res.success or not np.isfinite(res.x):
        raise EstimationError(
            f"Whittle minimization failed on bracket {WHITTLE_BOUNDS}: {res.message} "
            f"(last H={res.x!r}, contrast={res.fun!r})"
        )
    return float(res.x)
