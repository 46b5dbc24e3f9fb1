"""Command-line front end: ``hurstquant {synth,estimate,mc,variance,reproduce}``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiment as ex
from .estimators import AUTO_FILTER, estimate_h, estimate_h_whittle
from .filters import FilterError, parse_filter
from .quantiles import QuantileScheme, TrimSpec
from .synthesis import contaminate, make_rng, path_from_csv, path_to_csv, synth_general

log = logging.getLogger("hurstquant")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Flag parsing helpers


def parse_scheme(text: str) -> QuantileScheme:
    """'0.5' | '0.25,0.75' (equal weights) | '0.25,0.75:0.3,0.7'."""
    ps, _, cs = text.partition(":")
    p = [float(v) for v in ps.split(",") if v.strip()]
    if cs:
        return QuantileScheme(tuple(p), tuple(float(v) for v in cs.split(",")))
    return QuantileScheme.equal(p)


def parse_trim(text: str) -> TrimSpec:
    """'0.1' (symmetric) | '0.05,0.1'."""
    vals = [float(v) for v in text.split(",")]
    if len(vals) == 1:
        return TrimSpec.symmetric(vals[0])
    if len(vals) == 2:
        return TrimSpec(*vals)
    raise ValueError(f"--trim takes one or two fractions, got {text!r}")


def parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _model_dict(args, base: Optional[dict] = None) -> dict:
    d = dict(base or {"type": "fbm", "H": 0.5})
    if args.model is not None:
        d["type"] = args.model
    if args.hurst is not None:
        d["H"] = args.hurst
    if getattr(args, "sigma2", None) is not None:
        d["sigma2"] = args.sigma2
    return d


def _contamination(args, base=None):
    spec = base
    if args.contaminate or args.bern_p is not None or args.snr_db is not None:
        spec = dict(spec) if isinstance(spec, dict) else {}
        if args.bern_p is not None:
            spec["bernoulli_p"] = args.bern_p
        if args.snr_db is not None:
            spec["snr_db"] = args.snr_db
    return spec


def _estimator_from_args(args, base: Optional[dict] = None):
    """Estimator from --estimator tag or --scheme/--trim/--alpha/--transform, over an optional config dict."""
    if args.estimator is not None:
        return ex.builtin_estimator(args.estimator, args.filter or AUTO_FILTER, args.M or 5)
    if isinstance(base, str):
        return ex.builtin_estimator(base, args.filter or AUTO_FILTER, args.M or 5)
    d = dict(base or {})
    if args.scheme is not None and args.trim is not None:
        raise UsageError("--scheme and --trim are mutually exclusive")
    if args.scheme is not None:
        s = parse_scheme(args.scheme)
        d.update(statistic="quantile", p=list(s.p), c=list(s.c))
        d.pop("beta1", None), d.pop("beta2", None)
    if args.trim is not None:
        t = parse_trim(args.trim)
        d.update(statistic="trimmed_mean", beta1=t.beta1, beta2=t.beta2)
    if args.transform is not None:
        d["transform"] = args.transform
    if args.alpha is not None:
        d["alpha"] = args.alpha
        d.setdefault("transform", "power")
    if d.get("transform") == "power":
        d.setdefault("alpha", 2.0)
    if args.filter is not None:
        d["filter"] = args.filter
    if args.M is not None:
        d["M"] = args.M
    d.setdefault("name", "custom")
    return ex.estimator_from_dict(d)


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    path = Path(args.config)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        return ex.load_config_file(path)
    except Exception as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    model_d = _model_dict(args, cfg.get("model"))
    n = args.n if args.n is not None else cfg.get("n")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if n is None:
        raise UsageError("--n is required")
    try:
        model = ex.model_from_dict(model_d)
        cont_spec = ex.contamination_from(_contamination(args, cfg.get("contamination")))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    path = synth_general(model, int(n), int(seed))
    if cont_spec is not None:
        path = contaminate(path, cont_spec, make_rng(int(seed), 1))
    _emit(path_to_csv(path), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    try:
        est = _estimator_from_args(args, cfg.get("estimator"))
    except (ValueError, TypeError, FilterError) as exc:
        raise UsageError(str(exc)) from None
    src = Path(args.path)
    if not src.is_file():
        raise FileNotFoundError(f"path file not found: {src}")
    path = path_from_csv(src)
    if est == ex.WHITTLE:
        row = {"h_hat": repr(estimate_h_whittle(path.values)), "name": ex.WHITTLE}
    else:
        rep = estimate_h(path.values, est)
        row = rep.as_row()
        print(
            f"H_hat={rep.h_hat:.6f} filter={rep.filter_used} M={est.M} "
            f"statistic={row['statistic']} transform={est.transform}",
            file=sys.stderr,
        )
    buf = io.StringIO()
    buf.write(f"# source={src}\n")
    buf.write(",".join(row) + "\n")
    buf.write(",".join(_csv_cell(v) for v in row.values()) + "\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _csv_cell(v) -> str:
    s = str(v)
    return f'"{s}"' if ("," in s or " " in s) else s


def build_mc_config(args) -> ex.ExperimentConfig:
    cfg = _load_config(args)
    d = dict(cfg)
    d["model"] = _model_dict(args, cfg.get("model"))
    for key in ("n", "reps", "seed", "filter", "M"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if args.estimators is not None:
        d["estimators"] = [t.strip() for t in args.estimators.split(",") if t.strip()]
    d.setdefault("estimators", list(ex.BUILTIN_ESTIMATORS))
    if args.filter is not None:
        # a flag filter overrides any per-estimator filter of the config file
        d["estimators"] = [
            e if isinstance(e, str) else {**e, "filter": args.filter} for e in d["estimators"]
        ]
    cont = _contamination(args, cfg.get("contamination"))
    if cont is not None:
        d["contamination"] = cont
    if d.get("seed") is None:
        raise UsageError("Monte Carlo runs need a seed (--seed or 'seed' in the config)")
    for key in ("n", "reps"):
        if key not in d:
            raise UsageError(f"--{key} is required")
    try:
        return ex.config_from_dict(d)
    except (ValueError, TypeError, FilterError) as exc:
        raise UsageError(str(exc)) from None


def cmd_mc(args) -> int:
    cfg = build_mc_config(args)
    report = ex.run_mc(cfg, threads=args.threads)
    _emit(report.to_csv(), args.out)
    if args.raw:
        Path(args.raw).write_text(report.raw_csv())
    return EXIT_OK


def cmd_variance(args) -> int:
    try:
        Hs = parse_floats(args.hurst_list)
        if args.trim is not None and args.scheme is not None:
            raise UsageError("--scheme and --trim are mutually exclusive")
        if args.trim is not None:
            stat = parse_trim(args.trim)
            alpha = 2.0 if args.alpha is None else args.alpha
        else:
            stat = parse_scheme(args.scheme or "0.5")
            alpha = 0.0 if args.alpha is None else args.alpha
        if args.transform == "log":
            alpha = 0.0
        filt = args.filter or AUTO_FILTER
        if filt != AUTO_FILTER:
            parse_filter(filt)
    except (ValueError, FilterError) as exc:
        raise UsageError(str(exc)) from None
    rows = ex.variance_rows(Hs, filt, args.M or 5, stat, alpha)
    _emit(ex.variance_csv(rows), args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.target == "table1":
        text, reports = ex.reproduce_table1(args.reps, args.seed, args.threads)
        _emit(text, args.out)
        if args.plot:
            _table1_plot(reports, args.plot)
    else:
        rows = ex.fig2_grid()
        _emit(ex.fig2_csv(rows), args.out)
        if args.plot:
            ex.fig2_plot(rows, args.plot)
    return EXIT_OK


def _table1_plot(reports: dict, dest: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(reports), figsize=(4 * len(reports), 4), sharey=True, squeeze=False)
    for ax, ((kind, cont), rep) in zip(axes[0], reports.items()):
        ax.boxplot([c[np.isfinite(c)] for c in rep.raw.T])
        ax.set_xticks(range(1, len(rep.names) + 1), rep.names)
        ax.axhline(ex.TABLE1_H, color="grey", lw=0.8)
        ax.set_title(f"{kind}, {'contaminated' if cont else 'clean'}")
        ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    fig.savefig(dest, format="svg")
    plt.close(fig)


# ---------------------------------------------------------------------------
# Parser


def _add_model(p):
    p.add_argument("--model", choices=("fbm", "exp", "log"), help="variance function")
    p.add_argument("--hurst", type=float, help="Hurst exponent H")
    p.add_argument("--sigma2", type=float, help="scale (fbm only)")


def _add_estimator(p):
    p.add_argument("--estimator", choices=ex.BUILTIN_ESTIMATORS, help="built-in estimator tag")
    p.add_argument("--filter", help="inc1 | inc2 | db4 | auto | comma-separated coefficients")
    p.add_argument("--M", type=int, help="number of dilations")
    p.add_argument("--scheme", help="quantile orders p[,p..][:c,c..]")
    p.add_argument("--trim", help="trim fraction beta or beta1,beta2")
    p.add_argument("--alpha", type=float, help="power exponent (implies --transform power)")
    p.add_argument("--transform", choices=("log", "power"))


def _add_contamination(p):
    p.add_argument("--contaminate", action="store_true", help="add Bernoulli outliers")
    p.add_argument("--bern-p", type=float, help="outlier probability (default 0.005)")
    p.add_argument("--snr-db", type=float, help="signal-to-noise ratio in dB (default 20)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hurstquant", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="simulate a sample path to CSV")
    _add_model(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    _add_contamination(p)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="estimate H from a path CSV")
    p.add_argument("path")
    _add_estimator(p)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc", help="Monte Carlo study")
    _add_model(p)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--estimators", help=f"comma-separated tags from {','.join(ex.BUILTIN_ESTIMATORS)}")
    p.add_argument("--filter")
    p.add_argument("--M", type=int)
    _add_contamination(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--raw", help="also write per-replication estimates here")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("variance", help="asymptotic variance constants")
    p.add_argument("--hurst", dest="hurst_list", default="0.3,0.5,0.8", help="comma-separated H values")
    p.add_argument("--filter")
    p.add_argument("--M", type=int)
    p.add_argument("--scheme")
    p.add_argument("--trim")
    p.add_argument("--alpha", type=float)
    p.add_argument("--transform", choices=("log", "power"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("reproduce", help="regenerate the comparison table or variance curves")
    p.add_argument("target", choices=("table1", "fig2"))
    p.add_argument("--reps", type=int, default=ex.TABLE1_REPS)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--plot", metavar="SVG", help="also write an SVG figure")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hurstquant: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"hurstquant: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
