"""Monte Carlo studies: configuration, replication runner, reports and reproductions."""

from __future__ import annotations

import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .asymptotics import VarianceConfig, sigma2_alpha, sigma2_alpha_tm
from .estimators import (
    AUTO_FILTER,
    EstimatorConfig,
    astar,
    estimate_h,
    estimate_h_whittle,
    quadratic_variations_config,
)
from .filters import Filter, parse_filter
from .models import ProcessModel, model_from_dict
from .quantiles import QuantileScheme, TrimSpec
from .synthesis import ContaminationSpec, contaminate, make_rng, synth_general

log = logging.getLogger(__name__)

WHITTLE = "whittle"
MAX_FAILURE_RATE = 0.10
# stream ids under (seed, replication)
_PATH_STREAM = 0
_CONTAMINATION_STREAM = 1


class ConfigError(ValueError):
    pass


class McFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Estimator specs


BUILTIN_ESTIMATORS = ("median", "q90", "quartiles", "tm10", "qv", WHITTLE)


def builtin_estimator(tag: str, filter: Union[Filter, str] = AUTO_FILTER, M: int = 5):
    """Named estimator: the rows of the standard comparison table."""
    if tag == "median":
        return EstimatorConfig(QuantileScheme.single(0.5), None, filter, M, tag)
    if tag == "q90":
        return EstimatorConfig(QuantileScheme.single(0.9), None, filter, M, tag)
    if tag == "quartiles":
        return EstimatorConfig(QuantileScheme((0.25, 0.75), (0.5, 0.5)), 2.0, filter, M, tag)
    if tag == "tm10":
        return EstimatorConfig(TrimSpec(0.1, 0.1), 2.0, filter, M, tag)
    if tag == "qv":
        cfg = quadratic_variations_config(filter, M)
        return EstimatorConfig(cfg.statistic, cfg.alpha, cfg.filter, M, tag)
    if tag == WHITTLE:
        return WHITTLE
    raise ConfigError(f"unknown estimator {tag!r}; built-ins are {BUILTIN_ESTIMATORS}")


def estimator_from_dict(d: dict, default_filter="auto", default_M: int = 5) -> EstimatorConfig:
    name = d.get("name", "")
    stat = d.get("statistic", "quantile")
    if stat == "quantile":
        p = [float(v) for v in d.get("p", [0.5])]
        c = d.get("c")
        scheme = QuantileScheme.equal(p) if c is None else QuantileScheme(tuple(p), tuple(float(v) for v in c))
    elif stat in ("trimmed_mean", "trim"):
        scheme = TrimSpec(float(d.get("beta1", 0.0)), float(d.get("beta2", d.get("beta1", 0.0))))
    else:
        raise ConfigError(f"unknown statistic {stat!r}")
    transform = d.get("transform", "log")
    if transform == "log":
        alpha = None
    elif transform == "power":
        alpha = float(d.get("alpha", 2.0))
    else:
        raise ConfigError(f"unknown transform {transform!r}")
    filt = d.get("filter", default_filter)
    return EstimatorConfig(scheme, alpha, filt, int(d.get("M", default_M)), name)


def estimator_to_dict(cfg: EstimatorConfig) -> dict:
    d: dict = {"name": cfg.name}
    if isinstance(cfg.statistic, QuantileScheme):
        d.update(statistic="quantile", p=list(cfg.statistic.p), c=list(cfg.statistic.c))
    else:
        d.update(statistic="trimmed_mean", beta1=cfg.statistic.beta1, beta2=cfg.statistic.beta2)
    d["transform"] = cfg.transform
    if cfg.alpha is not None:
        d["alpha"] = cfg.alpha
    f = cfg.filter
    d["filter"] = f if isinstance(f, str) else (f.name or list(f.coeffs))
    d["M"] = cfg.M
    return d


def _estimator_name(est) -> str:
    return WHITTLE if est == WHITTLE else (est.name or "custom")


# ---------------------------------------------------------------------------
# Experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    model: ProcessModel
    n: int
    reps: int
    seed: int
    estimators: tuple
    contamination: Optional[ContaminationSpec] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        if self.seed is None:
            raise ConfigError("a seed is required for Monte Carlo runs")
        names = [_estimator_name(e) for e in self.estimators]
        if len(set(names)) != len(names):
            raise ConfigError(f"estimator names must be unique, got {names}")

    @property
    def names(self) -> list:
        return [_estimator_name(e) for e in self.estimators]


def contamination_from(spec) -> Optional[ContaminationSpec]:
    """None/False -> off; True -> defaults; dict -> explicit fields."""
    if spec is None or spec is False:
        return None
    if spec is True:
        return ContaminationSpec()
    return ContaminationSpec(float(spec.get("bernoulli_p", 0.005)), float(spec.get("snr_db", 20.0)))


def config_from_dict(d: dict) -> ExperimentConfig:
    try:
        model = model_from_dict(d["model"])
        default_filter = d.get("filter", AUTO_FILTER)
        default_M = int(d.get("M", 5))
        ests = []
        for e in d["estimators"]:
            if isinstance(e, str):
                ests.append(builtin_estimator(e, default_filter, default_M))
            else:
                ests.append(estimator_from_dict(e, default_filter, default_M))
        cont_spec = contamination_from(d.get("contamination"))
        seed = d.get("seed")
        return ExperimentConfig(
            model, int(d["n"]), int(d["reps"]), None if seed is None else int(seed), tuple(ests), cont_spec
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d: dict = {
        "model": cfg.model.to_dict(),
        "n": cfg.n,
        "reps": cfg.reps,
        "seed": cfg.seed,
        "estimators": [WHITTLE if e == WHITTLE else estimator_to_dict(e) for e in cfg.estimators],
    }
    if cfg.contamination is not None:
        d["contamination"] = {"bernoulli_p": cfg.contamination.bernoulli_p, "snr_db": cfg.contamination.snr_db}
    return d


def load_config_file(path: Union[str, Path]) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


# ---------------------------------------------------------------------------
# Runner


def simulate_path(cfg: ExperimentConfig, rep: int):
    path = synth_general(cfg.model, cfg.n, make_rng(cfg.seed, rep, _PATH_STREAM))
    if cfg.contamination is not None:
        path = contaminate(path, cfg.contamination, make_rng(cfg.seed, rep, _CONTAMINATION_STREAM))
    return path


def run_replication(cfg: ExperimentConfig, rep: int) -> np.ndarray:
    path = simulate_path(cfg, rep)
    out = np.full(len(cfg.estimators), np.nan)
    for k, est in enumerate(cfg.estimators):
        try:
            if est == WHITTLE:
                out[k] = estimate_h_whittle(path.values)
            else:
                out[k] = estimate_h(path.values, est).h_hat
        except Exception as exc:  # recorded, replayable from (seed, rep)
            log.warning(
                "replication %d (seed=%d) estimator %s failed: %s",
                rep, cfg.seed, _estimator_name(est), exc,
            )
    return out


@dataclass(eq=False)
class McReport:
    config: ExperimentConfig
    raw: np.ndarray  # (reps, estimators), nan marks a failure
    names: list = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            self.names = self.config.names

    def summary(self) -> list:
        rows = []
        for k, name in enumerate(self.names):
            col = self.raw[:, k]
            ok = col[np.isfinite(col)]
            rows.append(
                {
                    "estimator": name,
                    "mean": float(np.mean(ok)) if ok.size else math.nan,
                    "sd": float(np.std(ok, ddof=1)) if ok.size > 1 else math.nan,
                    "R": int(ok.size),
                    "failures": int(col.size - ok.size),
                }
            )
        return rows

    def to_csv(self, extra_header: Optional[dict] = None) -> str:
        buf = io.StringIO()
        _write_header(buf, _provenance(self.config, extra_header))
        buf.write("estimator,mean,sd,R,failures\n")
        for row in self.summary():
            buf.write(f"{row['estimator']},{_fmt(row['mean'])},{_fmt(row['sd'])},{row['R']},{row['failures']}\n")
        return buf.getvalue()

    def raw_csv(self) -> str:
        buf = io.StringIO()
        _write_header(buf, _provenance(self.config))
        buf.write("rep," + ",".join(self.names) + "\n")
        for r, row in enumerate(self.raw):
            buf.write(f"{r}," + ",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()


def run_mc(cfg: ExperimentConfig, threads: int = 1, max_failure_rate: float = MAX_FAILURE_RATE) -> McReport:
    """Run all replications; replication r uses streams derived from (seed, r)."""
    reps = range(cfg.reps)
    if threads <= 1:
        rows = [run_replication(cfg, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda r: run_replication(cfg, r), reps))
    raw = np.vstack(rows)
    failed = np.any(~np.isfinite(raw), axis=1).mean()
    if failed > max_failure_rate:
        raise McFailure(
            f"{failed:.1%} of replications had an estimator failure (limit {max_failure_rate:.0%})"
        )
    return McReport(cfg, raw)


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def _write_header(buf, items: dict) -> None:
    for k, v in items.items():
        buf.write(f"# {k}={v}\n")


def _provenance(cfg: ExperimentConfig, extra: Optional[dict] = None) -> dict:
    d = {
        "model": cfg.model.kind,
        "H": cfg.model.hurst,
        "sigma2": cfg.model.sigma2,
        "n": cfg.n,
        "reps": cfg.reps,
        "seed": cfg.seed,
        "contamination": "none" if cfg.contamination is None
        else f"bernoulli_p={cfg.contamination.bernoulli_p},snr_db={cfg.contamination.snr_db}",
        "rng": "PCG64(SeedSequence(seed, spawn_key=(rep, stream)))",
        "config": json.dumps(config_to_dict(cfg), sort_keys=True),
    }
    if extra:
        d.update(extra)
    return d


# ---------------------------------------------------------------------------
# Reproductions

TABLE1_H = 0.8
TABLE1_N = 1000
TABLE1_REPS = 500
TABLE1_ESTIMATORS = ("median", "q90", "quartiles", "tm10", "qv", WHITTLE)

# (model, contaminated) -> estimator -> (mean, sd) reported for the study
TABLE1_REFERENCE = {
    ("fbm", False): {"median": (0.796, 0.042), "q90": (0.797, 0.035), "quartiles": (0.795, 0.036),
                     "tm10": (0.797, 0.03), "qv": (0.802, 0.032), WHITTLE: (0.805, 0.024)},
    ("exp", False): {"median": (0.801, 0.042), "q90": (0.798, 0.036), "quartiles": (0.800, 0.037),
                     "tm10": (0.799, 0.034), "qv": (0.798, 0.032), WHITTLE: (0.806, 0.024)},
    ("fbm", True): {"median": (0.798, 0.047), "q90": (0.793, 0.033), "quartiles": (0.797, 0.040),
                    "tm10": (0.792, 0.037), "qv": (0.329, 0.162), WHITTLE: (0.519, 0.106)},
    ("exp", True): {"median": (0.803, 0.045), "q90": (0.789, 0.032), "quartiles": (0.796, 0.037),
                    "tm10": (0.797, 0.033), "qv": (0.353, 0.149), WHITTLE: (0.510, 0.100)},
}


def table1_config(model_kind: str = "fbm", contaminated: bool = False, reps: int = TABLE1_REPS,
                  seed: int = 2024, n: int = TABLE1_N, H: float = TABLE1_H) -> ExperimentConfig:
    """Comparison-table block; the filter is a* evaluated at the true H."""
    f = astar(H)
    ests = tuple(builtin_estimator(t, f, 5) for t in TABLE1_ESTIMATORS)
    return ExperimentConfig(
        ProcessModel(model_kind, H), n, reps, seed, ests, ContaminationSpec() if contaminated else None
    )


def reproduce_table1(reps: int = TABLE1_REPS, seed: int = 2024, threads: int = 1,
                     blocks: Sequence = (("fbm", False), ("exp", False), ("fbm", True), ("exp", True))):
    """Run every block; returns (csv text, {block: McReport})."""
    reports = {}
    buf = io.StringIO()
    _write_header(buf, {"study": "table1", "H": TABLE1_H, "n": TABLE1_N, "reps": reps, "seed": seed,
                        "filter": str(astar(TABLE1_H)), "M": 5})
    buf.write("block,model,estimator,mean,sd,R,failures,reference_mean,reference_sd\n")
    for i, (kind, cont) in enumerate(blocks):
        # distinct seeds per block keep the blocks independent
        cfg = table1_config(kind, cont, reps, seed + i)
        rep = run_mc(cfg, threads)
        reports[(kind, cont)] = rep
        ref = TABLE1_REFERENCE[(kind, cont)]
        for row in rep.summary():
            m, s = ref[row["estimator"]]
            buf.write(
                f"{'contaminated' if cont else 'clean'},{kind},{row['estimator']},{_fmt(row['mean'])},"
                f"{_fmt(row['sd'])},{row['R']},{row['failures']},{m},{s}\n"
            )
    return buf.getvalue(), reports


FIG2_H = (0.3, 0.5, 0.8)
FIG2_BETAS = tuple(round(0.025 * k, 3) for k in range(19))  # 0 .. 0.45
FIG2_PS = tuple(round(0.02 * k, 2) for k in range(1, 50))  # 0.02 .. 0.98


def fig2_grid(Hs: Sequence[float] = FIG2_H, betas: Sequence[float] = FIG2_BETAS,
              ps: Sequence[float] = FIG2_PS, M: int = 5, alpha: float = 2.0,
              i_max: int = 200, j_max: int = 150) -> list:
    """Variance constants versus trimming beta and versus a single quantile order p."""
    rows = []
    for H in Hs:
        f = astar(H)
        for b in betas:
            r = sigma2_alpha_tm(VarianceConfig(f, M, H, TrimSpec(b, b), alpha, i_max, j_max))
            rows.append({"H": H, "curve": "trimmed_mean", "x": b, "alpha": alpha, "filter": str(f),
                         "M": M, "sigma2": r.value, "tail_diag": r.last_j_term})
        for p in ps:
            r = sigma2_alpha(VarianceConfig(f, M, H, QuantileScheme.single(p), 0.0, i_max, j_max))
            rows.append({"H": H, "curve": "single_quantile", "x": p, "alpha": 0.0, "filter": str(f),
                         "M": M, "sigma2": r.value, "tail_diag": r.last_j_term})
    return rows


def fig2_csv(rows: list) -> str:
    buf = io.StringIO()
    _write_header(buf, {"study": "fig2", "truncation": "|i|<=200,j<=150"})
    buf.write("H,curve,x,alpha,filter,M,sigma2,tail_diag\n")
    for r in rows:
        buf.write(f"{r['H']},{r['curve']},{r['x']},{r['alpha']},{r['filter']},{r['M']},"
                  f"{r['sigma2']!r},{r['tail_diag']!r}\n")
    return buf.getvalue()


def fig2_plot(rows: list, dest: Union[str, Path]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    Hs = sorted({r["H"] for r in rows})
    fig, axes = plt.subplots(len(Hs), 2, figsize=(9, 3 * len(Hs)), squeeze=False)
    for i, H in enumerate(Hs):
        for j, curve in enumerate(("trimmed_mean", "single_quantile")):
            pts = [(r["x"], r["sigma2"]) for r in rows if r["H"] == H and r["curve"] == curve]
            ax = axes[i][j]
            ax.plot(*zip(*pts), marker=".")
            ax.set_xlabel("beta" if curve == "trimmed_mean" else "p")
            ax.set_ylabel("sigma^2")
            ax.set_title(f"H={H}, {curve.replace('_', ' ')}")
    fig.tight_layout()
    fig.savefig(dest, format="svg")
    plt.close(fig)


def variance_rows(Hs: Sequence[float], f: Union[Filter, str], M: int,
                  statistic: Union[QuantileScheme, TrimSpec], alpha: float,
                  i_max: int = 200, j_max: int = 150) -> list:
    rows = []
    for H in Hs:
        filt = astar(H) if f == AUTO_FILTER else parse_filter(f)
        cfg = VarianceConfig(filt, M, H, statistic, alpha, i_max, j_max)
        r = sigma2_alpha(cfg) if isinstance(statistic, QuantileScheme) else sigma2_alpha_tm(cfg)
        rows.append({"H": H, "alpha": alpha, "statistic": statistic.label(), "filter": str(filt),
                     "M": M, "sigma2": r.value, "tail_diag": r.last_j_term})
    return rows


def variance_csv(rows: list) -> str:
    buf = io.StringIO()
    buf.write("H,alpha,statistic,filter,M,sigma2,tail_diag\n")
    for r in rows:
        buf.write(f"{r['H']},{r['alpha']},\"{r['statistic']}\",{r['filter']},{r['M']},"
                  f"{r['sigma2']!r},{r['tail_diag']!r}\n")
    return buf.getvalue()
