"""Locally self-similar Gaussian process models and covariances of filtered series.

A model is described by its variance function v(t) = E X(t)^2, which behaves
like sigma^2 |t|^{2H} (1 + r(t)) near zero. Increments are stationary, so

    Cov(X(s), X(t)) = (v(s) + v(t) - v(s - t)) / 2

and for filters a, b

    E(X^a(i/n) X^b((i+j)/n)) = -1/2 sum_{q,q'} a_q b_q' v((q - q' + j)/n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import binom

from .filters import AnyFilter

MODEL_KINDS = ("fbm", "exp", "log", "custom")
# lags beyond this multiple of the filter span use a series without cancellation;
# |d/j| <= 1/2 so 60 terms reach 2^-60 relative accuracy
_FAR_LAG = 2
_SERIES_TERMS = 60


@dataclass(frozen=True)
class ProcessModel:
    """Gaussian process with stationary increments and variance function v.

    ``kind`` selects v: fbm -> sigma2 |t|^{2H}; exp -> 1 - exp(-|t|^{2H});
    log -> log(1 + |t|^{2H}); custom -> ``variance_fn`` (must be even with
    v(0) = 0). ``sigma2`` is the small-t scale and is forced to 1 for exp/log.
    """

    kind: str
    hurst: float
    sigma2: float = 1.0
    variance_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model type {self.kind!r}; expected one of {MODEL_KINDS}")
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.hurst}")
        if self.kind == "custom":
            if self.variance_fn is None:
                raise ValueError("custom model needs a variance_fn")
            if not self.sigma2 > 0:
                raise ValueError("sigma2 must be positive")
        elif self.kind == "fbm":
            if not self.sigma2 > 0:
                raise ValueError("sigma2 must be positive")
        else:
            object.__setattr__(self, "sigma2", 1.0)

    @property
    def scale(self) -> float:
        return self.sigma2

    def v(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        p = t ** (2.0 * self.hurst)
        if self.kind == "fbm":
            return self.sigma2 * p
        if self.kind == "exp":
            return -np.expm1(-p)
        if self.kind == "log":
            return np.log1p(p)
        return np.asarray(self.variance_fn(t), dtype=float)

    def remainder(self, t) -> np.ndarray:
        """r(t) = v(t) / (sigma^2 |t|^{2H}) - 1, with r(0) := 0."""
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == "fbm":
            return np.zeros_like(t)
        p = t ** (2.0 * self.hurst)
        out = np.zeros_like(t)
        nz = p > 0
        if self.kind == "exp":
            # -expm1(-p)/p - 1, evaluated stably for small p
            out[nz] = -np.expm1(-p[nz]) / p[nz] - 1.0
        elif self.kind == "log":
            out[nz] = np.log1p(p[nz]) / p[nz] - 1.0
        else:
            out[nz] = self.v(t[nz]) / (self.sigma2 * p[nz]) - 1.0
        return out

    def path_covariance(self, n: int) -> np.ndarray:
        """Covariance of (X(1/n), ..., X(1))."""
        t = np.arange(1, n + 1) / n
        vt = self.v(t)
        lag = self.v(np.arange(n) / n)
        idx = np.arange(n)
        return 0.5 * (vt[:, None] + vt[None, :] - lag[np.abs(idx[:, None] - idx[None, :])])

    def to_dict(self) -> dict:
        d = {"type": self.kind, "H": self.hurst}
        if self.kind in ("fbm", "custom"):
            d["sigma2"] = self.sigma2
        return d


def model_from_dict(d: dict) -> ProcessModel:
    kind = str(d.get("type", d.get("kind", "fbm"))).lower()
    hurst = d.get("H", d.get("hurst"))
    if hurst is None:
        raise ValueError("model config needs H")
    return ProcessModel(kind, float(hurst), float(d.get("sigma2", 1.0)))


def _lag_weights(a: AnyFilter, b: AnyFilter):
    """Return (d, c_d) with c_d = sum_{q - q' = d} a_q b_q'."""
    av = a.as_array()
    bv = b.as_array()
    offsets = np.arange(av.size)[:, None] - np.arange(bv.size)[None, :] + (bv.size - 1)
    c = np.bincount(offsets.ravel(), weights=np.outer(av, bv).ravel(), minlength=av.size + bv.size - 1)
    d = np.arange(-(bv.size - 1), av.size)
    return d, c


def gamma(a: AnyFilter, b: AnyFilter, j, H: float):
    """gamma^{a,b}(j) = -1/2 sum_{q,q'} a_q b_q' |q - q' + j|^{2H}; vectorized in j."""
    d, c = _lag_weights(a, b)
    jj = np.asarray(j, dtype=float)
    flat = jj.reshape(-1)
    out = np.empty(flat.size)
    # far lags: expand |j + d|^{2H} = |j|^{2H} sum_k binom(2H, k) (d/j)^k; the
    # moments sum_d c_d d^k vanish for k below nu_a + nu_b, so those terms are
    # dropped instead of being left to cancel in floating point
    far = np.abs(flat) > _FAR_LAG * max(1, np.abs(d).max())
    near = ~far
    if near.any():
        lags = np.abs(d[None, :] + flat[near, None])
        out[near] = -0.5 * (lags ** (2.0 * H)) @ c
    if far.any():
        k0 = a.order + b.order
        k = np.arange(k0, k0 + _SERIES_TERMS)
        moments = (d[:, None].astype(float) ** k[None, :]).T @ c
        coef = binom(2.0 * H, k) * moments
        y = 1.0 / flat[far]
        # Horner in y = 1/j, then the common factor y^k0
        series = np.polyval(coef[::-1], y) * y**k0
        out[far] = -0.5 * np.abs(flat[far]) ** (2.0 * H) * series
    return out.reshape(jj.shape) if jj.ndim else float(out[0])


def rho(a: AnyFilter, b: AnyFilter, j, H: float):
    """Correlation gamma^{a,b}(j) / sqrt(gamma^a(0) gamma^b(0))."""
    return gamma(a, b, j, H) / math.sqrt(gamma(a, a, 0, H) * gamma(b, b, 0, H))


def kappa(a: AnyFilter, model: ProcessModel, n: int) -> float:
    """Leading variance n^{-2H} sigma^2 gamma^a(0) of the filtered series."""
    return n ** (-2.0 * model.hurst) * model.sigma2 * gamma(a, a, 0, model.hurst)


def delta_n(a: AnyFilter, b: AnyFilter, j: int, model: ProcessModel, n: int) -> float:
    """Relative departure delta_n^{a,b}(j) of the filtered covariance from its fBm form.

    Defined so that the exact covariance equals
    sigma^2 n^{-2H} gamma^{a,b}(j) (1 + delta_n). Returns nan (undefined)
    when gamma^{a,b}(j) vanishes.
    """
    if model.kind == "fbm":
        return 0.0
    H = model.hurst
    d, c = _lag_weights(a, b)
    lag = d + j
    pw = np.abs(lag).astype(float) ** (2.0 * H)
    g = -0.5 * np.dot(c, pw)
    if abs(g) <= 1e-14 * np.dot(np.abs(c), pw):
        return math.nan
    num = -0.5 * np.dot(c, pw * model.remainder(lag / n))
    return float(num / g)


def cross_covariance(a: AnyFilter, b: AnyFilter, j, model: ProcessModel, n: int):
    """E(X^a(i/n) X^b((i+j)/n)) under the exact variance function."""
    d, c = _lag_weights(a, b)
    jj = np.asarray(j, dtype=float)
    vals = model.v((d[None, :] + jj.reshape(-1, 1)) / n) @ c
    out = -0.5 * vals
    return out.reshape(jj.shape) if jj.ndim else float(out[0])


def filtered_cov_matrix(
    filters: Sequence[AnyFilter], model: ProcessModel, n: int, length: Optional[int] = None
) -> np.ndarray:
    """Covariance of the stacked filtered series.

    Each block row/column covers indices i = l_max+1, ..., l_max+length (1-based),
    where l_max is the longest filter support, so every entry is fully supported.
    ``length`` defaults to n - l_max.
    """
    ell_max = max(f.ell for f in filters)
    if n <= ell_max:
        raise ValueError(f"n={n} must exceed the longest filter support {ell_max}")
    if length is None:
        length = n - ell_max
    if not 1 <= length <= n - ell_max:
        raise ValueError(f"length must be in [1, {n - ell_max}]")
    k = len(filters)
    lags = np.arange(-(length - 1), length)
    idx = np.arange(length)
    jmat = idx[None, :] - idx[:, None] + (length - 1)
    out = np.empty((k * length, k * length))
    for r, fa in enumerate(filters):
        for s, fb in enumerate(filters):
            if s < r:
                continue
            block = cross_covariance(fa, fb, lags, model, n)[jmat]
            out[r * length:(r + 1) * length, s * length:(s + 1) * length] = block
            out[s * length:(s + 1) * length, r * length:(r + 1) * length] = block.T
    return out
