"""Sample quantiles, convex quantile combinations and trimmed means.

The sample quantile of order p is the ceil(n p)-th order statistic, the
left-continuous inverse of the empirical CDF. With this convention the i-th
order statistic is exactly the sample quantile of order i/n, so a trimmed
mean is an average of sample quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate
from scipy.special import ndtri

# n*p is rounded to this many decimals before ceil/floor so that
# e.g. 10 * 0.3 = 3.0000000000000004 selects the 3rd order statistic
_INDEX_DECIMALS = 9


def _ceil_index(n: int, p: float) -> int:
    k = math.ceil(round(n * p, _INDEX_DECIMALS))
    return min(max(k, 1), n)


def _floor_count(n: int, beta: float) -> int:
    return math.floor(round(n * beta, _INDEX_DECIMALS))


@dataclass(frozen=True)
class QuantileScheme:
    """Orders p_k and convex weights c_k of a quantile combination."""

    p: tuple[float, ...]
    c: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(self.p))
        c = tuple(float(v) for v in np.atleast_1d(self.c))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c", c)
        if len(p) < 1 or len(p) != len(c):
            raise ValueError("p and c must be nonempty and of equal length")
        if not all(0.0 < v < 1.0 for v in p):
            raise ValueError(f"quantile orders must lie in (0, 1), got {p}")
        if not all(v > 0.0 for v in c):
            raise ValueError(f"weights must be positive, got {c}")
        if abs(sum(c) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got sum {sum(c)!r}")

    @classmethod
    def single(cls, p: float) -> "QuantileScheme":
        return cls((p,), (1.0,))

    @classmethod
    def equal(cls, ps: Sequence[float]) -> "QuantileScheme":
        k = len(ps)
        c = [1.0 / k] * k
        # keep the sum exactly 1 after rounding
        c[-1] = 1.0 - sum(c[:-1])
        return cls(tuple(ps), tuple(c))

    @property
    def K(self) -> int:
        return len(self.p)

    def label(self) -> str:
        p = ",".join(f"{v:g}" for v in self.p)
        c = ",".join(f"{v:g}" for v in self.c)
        return f"p={p};c={c}"


@dataclass(frozen=True)
class TrimSpec:
    """Trim fractions: the lowest floor(n beta1) and highest floor(n beta2) values are dropped."""

    beta1: float = 0.0
    beta2: float = 0.0

    def __post_init__(self):
        b1, b2 = float(self.beta1), float(self.beta2)
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)
        if not (0.0 <= b1 <= b2 < 1.0):
            raise ValueError(f"need 0 <= beta1 <= beta2 < 1, got ({b1}, {b2})")
        if b1 + b2 >= 1.0:
            raise ValueError("beta1 + beta2 must be < 1")

    @classmethod
    def symmetric(cls, beta: float) -> "TrimSpec":
        return cls(beta, beta)

    def label(self) -> str:
        return f"beta={self.beta1:g},{self.beta2:g}"


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    return x


def sample_quantile(x, p: float) -> float:
    """ceil(n p)-th order statistic of x (1-based)."""
    x = _as_vector(x)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile order must lie in (0, 1), got {p}")
    k = _ceil_index(x.size, p) - 1
    return float(np.partition(x, k)[k])


def quantile_combination(x, scheme: QuantileScheme) -> float:
    """sum_k c_k * sample_quantile(x, p_k)."""
    x = _as_vector(x)
    ks = [_ceil_index(x.size, p) - 1 for p in scheme.p]
    if scheme.K >= 3:
        s = np.sort(x, kind="stable")
    else:
        s = np.partition(x, sorted(set(ks)))
    return float(sum(c * s[k] for c, k in zip(scheme.c, ks)))


def trimmed_mean(x, trim: TrimSpec) -> float:
    """Mean of the order statistics floor(n b1)+1 .. n-floor(n b2)."""
    x = _as_vector(x)
    n = x.size
    lo = _floor_count(n, trim.beta1)
    hi = n - _floor_count(n, trim.beta2)
    if hi - lo < 1:
        raise ValueError(f"trimming {trim.label()} removes all {n} values")
    if lo == 0 and hi == n:
        return float(np.mean(x))
    s = np.sort(x, kind="stable")
    return float(np.mean(s[lo:hi]))


# ---------------------------------------------------------------------------
# Population counterparts for a standard Gaussian Y


def norm_ppf(u):
    """Standard normal quantile (Cephes ndtri, ~1e-16 relative accuracy)."""
    return ndtri(u)


def absnormal_quantile(p):
    """Quantile of |Y|: q = Phi^{-1}((1 + p) / 2)."""
    return ndtri((1.0 + np.asarray(p, dtype=float)) / 2.0)


Transform = Union[float, str]


def _transform_fn(g: Transform) -> Callable[[np.ndarray], np.ndarray]:
    if g == "log":
        return np.log
    alpha = float(g)
    if alpha <= 0:
        raise ValueError("power transform needs alpha > 0")
    return lambda t: np.power(t, alpha)


def theoretical_quantile_absnormal(p, g: Transform = 1.0):
    """Population quantile of g(|Y|): g applied to Phi^{-1}((1 + p) / 2).

    ``g`` is a power exponent alpha (|.|^alpha) or the string 'log'.
    """
    return _transform_fn(g)(absnormal_quantile(p))


def theoretical_quantile_combination(scheme: QuantileScheme, g: Transform = 1.0) -> float:
    return float(sum(c * theoretical_quantile_absnormal(p, g) for p, c in zip(scheme.p, scheme.c)))


def theoretical_trimmed_mean(g: Transform, trim: TrimSpec, rtol: float = 1e-10) -> float:
    """(1 / (1 - b1 - b2)) * int_{b1}^{1-b2} xi(p, g(|Y|)) dp by adaptive quadrature.

    Integrated on the q scale (dp = 2 phi(q) dq) so the p -> 1 end becomes an
    infinite range with a Gaussian weight.
    """
    fn = _transform_fn(g)
    q_lo = float(absnormal_quantile(trim.beta1)) if trim.beta1 > 0 else 0.0
    q_hi = float(absnormal_quantile(1.0 - trim.beta2)) if trim.beta2 > 0 else np.inf
    dens = lambda t: 2.0 * np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    val, _ = integrate.quad(lambda t: fn(t) * dens(t), q_lo, q_hi, epsrel=rtol, epsabs=0.0, limit=200)
    return val / (1.0 - trim.beta1 - trim.beta2)
