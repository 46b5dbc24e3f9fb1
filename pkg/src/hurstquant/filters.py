"""Discrete filters, their vanishing-moment order, and m-fold dilations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

MOMENT_TOL = 1e-10
MAX_ORDER = 32

INC1 = (1.0, -1.0)
INC2 = (1.0, -2.0, 1.0)
# Daubechies high-pass filter with two vanishing moments, unit l2 norm.
# Closed form of (0.4829629, -0.8365163, 0.22414386, 0.12940952).
_S3 = np.sqrt(3.0)
_D = 4.0 * np.sqrt(2.0)
DB4 = ((1 + _S3) / _D, -(3 + _S3) / _D, (3 - _S3) / _D, -(1 - _S3) / _D)

NAMED_FILTERS = {"inc1": INC1, "inc2": INC2, "db4": DB4}


class FilterError(ValueError):
    pass


def moment_order(coeffs, tol: float = MOMENT_TOL) -> int:
    """Smallest j with a non-vanishing moment sum_q q^j a_q.

    A moment counts as zero when |sum_q q^j a_q| <= tol * sum_q |a_q| q^j.
    Returns 0 when the coefficients do not sum to zero.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    q = np.arange(coeffs.size, dtype=float)
    for j in range(MAX_ORDER + 1):
        w = q**j
        scale = np.sum(np.abs(coeffs) * w)
        if scale == 0.0:
            continue
        if abs(np.sum(coeffs * w)) > tol * scale:
            return j
    raise FilterError("filter annihilates every tested moment; coefficients degenerate")


@dataclass(frozen=True)
class Filter:
    """Filter a_0..a_l of order nu (first non-vanishing moment)."""

    coeffs: tuple[float, ...]
    order: int
    name: str = ""

    @property
    def length(self) -> int:
        return len(self.coeffs)

    @property
    def ell(self) -> int:
        return len(self.coeffs) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __str__(self) -> str:
        return self.name or ",".join(f"{c:g}" for c in self.coeffs)


@dataclass(frozen=True)
class DilatedFilter:
    base: Filter
    m: int
    coeffs: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if self.m < 1:
            raise FilterError(f"dilation factor must be >= 1, got {self.m}")
        out = np.zeros(self.m * self.base.ell + 1)
        out[:: self.m] = self.base.coeffs
        object.__setattr__(self, "coeffs", tuple(float(c) for c in out))

    @property
    def order(self) -> int:
        return self.base.order

    @property
    def ell(self) -> int:
        return len(self.coeffs) - 1

    @property
    def name(self) -> str:
        return f"{self.base}^{self.m}"

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)


AnyFilter = Union[Filter, DilatedFilter]


def make_filter(coeffs: Sequence[float], name: str = "", tol: float = MOMENT_TOL) -> Filter:
    """Build a Filter, inferring its order from the moment sums.

    ``tol`` is the relative threshold below which a moment sum is treated as
    zero; coefficients copied with few digits may need a looser value.
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise FilterError("a filter needs at least 2 coefficients")
    if not np.all(np.isfinite(a)):
        raise FilterError("filter coefficients must be finite")
    if not np.any(a != 0):
        raise FilterError("filter coefficients are all zero")
    order = moment_order(a, tol)
    if order == 0:
        raise FilterError(
            f"coefficients sum to {a.sum():g}, not 0: not a filter (order would be 0)"
        )
    return Filter(tuple(float(c) for c in a), order, name)


def named_filter(name: str) -> Filter:
    try:
        return make_filter(NAMED_FILTERS[name], name=name)
    except KeyError:
        raise FilterError(
            f"unknown filter {name!r}; choose from {sorted(NAMED_FILTERS)}"
        ) from None


def parse_filter(spec: Union[str, Sequence[float], Filter]) -> Filter:
    """Resolve a config value: a name ('inc1', 'inc2', 'db4'), a comma list, or a list."""
    if isinstance(spec, Filter):
        return spec
    if isinstance(spec, str):
        s = spec.strip()
        if s in NAMED_FILTERS:
            return named_filter(s)
        try:
            values = [float(v) for v in s.split(",")]
        except ValueError:
            raise FilterError(f"cannot parse filter {spec!r}") from None
        return make_filter(values)
    return make_filter(spec)


def dilate(f: Filter, m: int) -> DilatedFilter:
    return DilatedFilter(f, int(m))


def apply_filter(f: AnyFilter, x) -> np.ndarray:
    """Fully supported filtered series y_i = sum_q a_q x_{i-q}, i = l+1..n."""
    x = np.asarray(x, dtype=float)
    a = f.as_array()
    if x.size < a.size:
        raise FilterError(
            f"path of length {x.size} is too short for a filter of length {a.size}"
        )
    return np.convolve(x, a, mode="valid")
