"""Exact sample paths of the process models and the additive-outlier contamination.

Random streams: every generator is ``numpy.random.Generator(PCG64)`` seeded
from ``SeedSequence(seed, spawn_key=(stream,))``, so replication r of a
Monte Carlo study owns an independent, reproducible stream. Gaussian draws
always go through ``Generator.standard_normal`` (ziggurat).
"""

from __future__ import annotations

import csv
import functools
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .models import ProcessModel, model_from_dict

log = logging.getLogger(__name__)

DENSE_MAX_N = 2**14
# relative tolerance on negative circulant eigenvalues (round-off only)
EIG_TOL = 1e-10

SeedLike = Union[int, np.random.Generator, None]


class SynthesisError(RuntimeError):
    pass


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent PCG64 stream for (seed, stream...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng()
    return make_rng(seed)


@dataclass(frozen=True)
class ContaminationSpec:
    bernoulli_p: float = 0.005
    snr_db: float = 20.0

    def __post_init__(self):
        if not 0.0 <= self.bernoulli_p <= 1.0:
            raise ValueError(f"bernoulli_p must lie in [0, 1], got {self.bernoulli_p}")


@dataclass(frozen=True, eq=False)
class SamplePath:
    """X(i/n), i = 1..n (X(0) = 0 is implicit and not stored)."""

    values: np.ndarray
    model: Optional[ProcessModel] = None
    seed: Optional[int] = None
    contaminated: bool = False

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, prepend=0.0)


def fgn_autocovariance(H: float, k) -> np.ndarray:
    """Unit-scale fGn autocovariance 1/2(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


@functools.lru_cache(maxsize=32)
def _circulant_sqrt_eigs(H: float, n: int) -> np.ndarray:
    r = fgn_autocovariance(H, np.arange(n + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -EIG_TOL * lam.max():
        raise SynthesisError(
            f"circulant embedding of fGn(H={H}, n={n}) has a negative eigenvalue "
            f"{lam.min():.3g}; double the embedding size"
        )
    return np.sqrt(np.clip(lam, 0.0, None) / row.size)


def synth_fgn_circulant(H: float, n: int, seed: SeedLike = None, sigma2: float = 1.0) -> np.ndarray:
    """Exact fGn increments X(i/n) - X((i-1)/n), i = 1..n, by circulant embedding.

    Autocovariance sigma2 * n^{-2H} * fgn_autocovariance(H, k).
    """
    if not 0.0 < H < 1.0:
        raise ValueError(f"H must lie in (0, 1), got {H}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = _rng(seed)
    sq = _circulant_sqrt_eigs(float(H), n)
    z = rng.standard_normal(2 * sq.size).view(np.complex128)
    w = np.fft.fft(sq * z)
    return w.real[:n] * (np.sqrt(sigma2) * float(n) ** (-H))


@functools.lru_cache(maxsize=8)
def _dense_factor(model: ProcessModel, n: int) -> np.ndarray:
    cov = model.path_covariance(n)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(cov)
    if w.min() < -1e-10 * w.max():
        raise SynthesisError(
            f"covariance of model {model.kind}(H={model.hurst}) at n={n} is not "
            f"positive semidefinite (min eigenvalue {w.min():.3g})"
        )
    return V * np.sqrt(np.clip(w, 0.0, None))


def synth_general(model: ProcessModel, n: int, seed: SeedLike = None) -> SamplePath:
    """Exact Gaussian path on {i/n}; fBm uses circulant embedding, other models a dense factor."""
    if n < 1:
        raise ValueError("n must be positive")
    seed_val = seed if isinstance(seed, (int, np.integer)) else None
    rng = _rng(seed)
    if model.kind == "fbm":
        values = np.cumsum(synth_fgn_circulant(model.hurst, n, rng, model.sigma2))
    else:
        if n > DENSE_MAX_N:
            raise SynthesisError(
                f"dense synthesis of model {model.kind} limited to n <= {DENSE_MAX_N}, got {n}"
            )
        L = _dense_factor(model, n)
        values = L @ rng.standard_normal(n)
    return SamplePath(values, model, seed_val, False)


def contaminate(path: SamplePath, spec: ContaminationSpec, seed: SeedLike = None) -> SamplePath:
    """Additive outliers X(i/n) + U(i) V(i).

    U(i) ~ Bernoulli(bernoulli_p); V(i) ~ N(0, v(i/n) 10^{-snr_db/10}) is drawn
    only where U(i) = 1.
    """
    if path.n == 0:
        raise ValueError("cannot contaminate an empty path")
    if path.model is None:
        raise ValueError("contamination needs the path's model for the signal variance")
    rng = _rng(seed)
    hit = rng.random(path.n) < spec.bernoulli_p
    out = path.values.copy()
    if hit.any():
        t = (np.flatnonzero(hit) + 1) / path.n
        sd = np.sqrt(path.model.v(t) * 10.0 ** (-spec.snr_db / 10.0))
        out[hit] += sd * rng.standard_normal(int(hit.sum()))
    return replace(path, values=out, contaminated=True)


# ---------------------------------------------------------------------------
# CSV exchange: '# key=value' header lines, then one value per line.


def path_to_csv(path: SamplePath, dest: Union[str, Path, io.TextIOBase, None] = None) -> str:
    lines = [f"# n={path.n}"]
    if path.model is not None:
        for k, v in path.model.to_dict().items():
            lines.append(f"# {'model' if k == 'type' else k}={v}")
    if path.seed is not None:
        lines.append(f"# seed={path.seed}")
    lines.append(f"# contaminated={str(path.contaminated).lower()}")
    lines.append("value")
    lines.extend(repr(float(v)) for v in path.values)
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    elif dest is not None:
        dest.write(text)
    return text


class PathFormatError(ValueError):
    pass


def path_from_csv(src: Union[str, Path]) -> SamplePath:
    """Read a path written by ``path_to_csv`` (header lines optional)."""
    src = Path(src)
    meta: dict = {}
    values = []
    with src.open(newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            row = next(csv.reader([line]))
            cell = row[0].strip()
            try:
                values.append(float(cell))
            except ValueError:
                if not values and cell.lower() == "value":
                    continue
                raise PathFormatError(f"{src}:{lineno}: not a number: {cell!r}") from None
    if not values:
        raise PathFormatError(f"{src}: no values found")
    if "n" in meta and int(meta["n"]) != len(values):
        raise PathFormatError(f"{src}: header says n={meta['n']} but found {len(values)} values")
    model = None
    if "model" in meta and "H" in meta:
        model = model_from_dict({"type": meta["model"], "H": meta["H"], "sigma2": meta.get("sigma2", 1.0)})
    seed = int(meta["seed"]) if "seed" in meta else None
    return SamplePath(
        np.asarray(values), model, seed, meta.get("contaminated", "false") == "true"
    )
