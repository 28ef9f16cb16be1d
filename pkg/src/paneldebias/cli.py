"""Command-line front end.

Two subcommands:

``estimate``
    Ingest a long-format CSV panel, run one or more estimators and print a
    coefficient table (analytic SEs in parentheses, bootstrap SEs in
    brackets, long-run row); a machine-readable JSON report is always
    written with full double precision.

``mc``
    Run a Monte Carlo study described by a flat key=value config file and
    emit CSV/JSON reports.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 estimation error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .design import build_design
from .estimators import ESTIMATOR_REGISTRY, make_estimator
from .exceptions import ConfigError, DataError, EstimationError
from .inference import cluster_bootstrap
from .panel import read_panel_csv
from .simulate import DGPConfig, mc_study

EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 2, 3, 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paneldebias",
        description="Dynamic panel estimation with bias corrections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a panel model from a CSV file")
    est.add_argument("--data", required=True, help="long-format CSV (unit,period,vars)")
    est.add_argument("--outcome", required=True)
    est.add_argument(
        "--treatment", action="append", required=True,
        help="treatment variable (repeatable)",
    )
    est.add_argument(
        "--estimator", action="append", default=None,
        choices=sorted(ESTIMATOR_REGISTRY), help="estimator to run (repeatable)",
    )
    est.add_argument("--lags", type=int, default=4, help="outcome lags (default 4)")
    est.add_argument("--trim", type=int, default=4, help="analytic-correction trimming")
    est.add_argument("--splits", type=int, default=1, help="random splits for dab-ss")
    est.add_argument("--boot", type=int, default=0, help="bootstrap replicates (0 = off)")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument(
        "--split-convention", choices=("paper", "nonoverlap"), default="paper"
    )
    est.add_argument("--lag-cap", type=int, default=None, help="cap instrument depth")
    est.add_argument(
        "--small-sample", action="store_true",
        help="apply the G/(G-1)*(n-1)/(n-p) covariance factor",
    )
    est.add_argument(
        "--scale100", action="store_true",
        help="display treatment and long-run rows times 100",
    )
    est.add_argument("--json-out", default="estimates.json")
    est.add_argument("--jobs", type=int, default=1, help="parallel bootstrap workers")

    mc = sub.add_parser("mc", help="run a Monte Carlo study from a config file")
    mc.add_argument("--config", required=True, help="flat key=value config file")
    mc.add_argument("--out-json", default="mc_study.json")
    mc.add_argument("--out-csv", default="mc_study.csv")
    mc.add_argument("--jobs", type=int, default=1)
    return parser


# -- estimate ----------------------------------------------------------------

def _estimator_options(args) -> dict:
    return {
        "trim": args.trim,
        "n_splits": args.splits,
        "seed": args.seed,
        "convention": args.split_convention,
        "lag_cap": args.lag_cap,
        "small_sample": args.small_sample,
    }


def _estimate_payload(args) -> dict:
    panel = read_panel_csv(args.data)
    sample = build_design(panel, args.outcome, tuple(args.treatment), args.lags)
    names = args.estimator or ["fe"]
    seen = []
    for n in names:
        if n not in seen:
            seen.append(n)

    estimators = {}
    for name in seen:
        est = make_estimator(name, **_estimator_options(args))
        est.fit(sample)
        entry = {
            "coef_names": list(est.coef_names_),
            "coef": [float(v) for v in est.coef_],
            "se_analytic": [float(v) for v in est.se_],
            "long_run": [float(v) for v in est.long_run_],
            "long_run_se_analytic": [float(v) for v in est.long_run_se_],
            "n": est.n_,
            "p": est.p_,
            "m": est.m_,
            "small_bias": {
                "ratio": est.diagnostic_.ratio,
                "debiasing_recommended": est.diagnostic_.flagged,
                "text": est.diagnostic_.text,
            },
            "bootstrap": None,
        }
        if args.boot > 0:
            boot = cluster_bootstrap(
                sample,
                make_estimator(name, **_estimator_options(args)),
                n_boot=args.boot,
                seed=args.seed,
                n_jobs=args.jobs,
            )
            entry["bootstrap"] = {
                "replicates": boot.n_requested,
                "failed": boot.n_failed,
                "seed": boot.seed,
                "se": {q: float(s) for q, s in zip(boot.names, boot.se)},
            }
        estimators[name] = entry

    return {
        "data": args.data,
        "outcome": args.outcome,
        "treatments": list(args.treatment),
        "lags": args.lags,
        "seed": args.seed,
        "scale100": bool(args.scale100),
        "estimators": estimators,
    }


def render_table(payload: dict) -> str:
    """Text report built solely from the JSON payload."""
    names = list(payload["estimators"])
    treatments = payload["treatments"]
    scale = 100.0 if payload["scale100"] else 1.0
    first = payload["estimators"][names[0]]
    coef_names = first["coef_names"]
    width = max(12, max(len(n) for n in names) + 2)
    label_w = max(18, max(len(c) for c in coef_names) + 8)

    def fmt_row(label, values, decorate=lambda s: s):
        cells = "".join(
            decorate(f"{v:.2f}").rjust(width) if v is not None else " " * width
            for v in values
        )
        return label.ljust(label_w) + cells

    lines = ["".ljust(label_w) + "".join(n.rjust(width) for n in names)]
    for j, cname in enumerate(coef_names):
        s = scale if cname in treatments else 1.0
        coef = [payload["estimators"][n]["coef"][j] * s for n in names]
        ses = [payload["estimators"][n]["se_analytic"][j] * s for n in names]
        label = cname if cname in treatments else f"{cname} {payload['outcome']}"
        lines.append(fmt_row(label, coef))
        lines.append(fmt_row("", ses, decorate=lambda t: f"({t})"))
        boots = [
            payload["estimators"][n]["bootstrap"]["se"].get(cname) * s
            if payload["estimators"][n]["bootstrap"]
            else None
            for n in names
        ]
        if any(b is not None for b in boots):
            lines.append(fmt_row("", boots, decorate=lambda t: f"[{t}]"))
    for idx, tname in enumerate(treatments):
        lr = [payload["estimators"][n]["long_run"][idx] * scale for n in names]
        lr_se = [
            payload["estimators"][n]["long_run_se_analytic"][idx] * scale
            for n in names
        ]
        lines.append(fmt_row(f"long run: {tname}", lr))
        lines.append(fmt_row("", lr_se, decorate=lambda t: f"({t})"))
        boots = [
            payload["estimators"][n]["bootstrap"]["se"].get(f"long_run:{tname}")
            * scale
            if payload["estimators"][n]["bootstrap"]
            else None
            for n in names
        ]
        if any(b is not None for b in boots):
            lines.append(fmt_row("", boots, decorate=lambda t: f"[{t}]"))

    dims = []
    for n in names:
        e = payload["estimators"][n]
        dims.append(
            f"{n}: n={e['n']} p={e['p']} m={e['m']}  {e['small_bias']['text']}"
        )
    return "\n".join(lines + dims)


def _run_estimate(args) -> int:
    payload = _estimate_payload(args)
    print(render_table(payload))
    with open(args.json_out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"\nJSON written to {args.json_out}")
    return 0


# -- mc ----------------------------------------------------------------------

_MC_FLOAT_KEYS = {
    "alpha", "sigma_unit", "sigma_time", "sigma_noise", "stay_prob",
    "loading", "feedback", "noise_df",
}
_MC_INT_KEYS = {"n_units", "n_periods", "burn_in", "reps", "seed", "lags",
                "trim", "splits", "lag_cap"}
_MC_KEYS = (
    _MC_FLOAT_KEYS
    | _MC_INT_KEYS
    | {"rho", "estimators", "convention", "include_treatment"}
)


def parse_mc_config(path) -> dict:
    """Parse a flat key=value study config; errors carry line numbers."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _MC_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                if key in _MC_INT_KEYS:
                    values[key] = int(value)
                elif key in _MC_FLOAT_KEYS:
                    values[key] = float(value)
                elif key == "rho":
                    values[key] = tuple(
                        float(v) for v in value.split(",") if v.strip() != ""
                    )
                elif key == "include_treatment":
                    if value.lower() not in ("true", "false"):
                        raise ValueError(value)
                    values[key] = value.lower() == "true"
                else:
                    values[key] = value
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: invalid value {value!r} for {key!r}"
                ) from None
    return values


def _run_mc(args) -> int:
    raw = parse_mc_config(args.config)
    dgp_keys = {
        "n_units", "n_periods", "alpha", "rho", "sigma_unit", "sigma_time",
        "sigma_noise", "stay_prob", "loading", "burn_in", "noise_df",
    }
    missing = {"n_units", "n_periods", "alpha", "rho"} - set(raw)
    if missing:
        raise ConfigError(f"{args.config}: missing required keys {sorted(missing)}")
    config = DGPConfig(**{k: v for k, v in raw.items() if k in dgp_keys})

    est_names = [e.strip() for e in raw.get("estimators", "fe").split(",") if e.strip()]
    options = {
        "trim": raw.get("trim", 4),
        "n_splits": raw.get("splits", 1),
        "seed": raw.get("seed", 0),
        "convention": raw.get("convention", "paper"),
        "lag_cap": raw.get("lag_cap"),
    }
    try:
        estimators = {name: make_estimator(name, **options) for name in est_names}
    except KeyError as err:
        raise ConfigError(f"{args.config}: {err.args[0]}") from None

    treatments = ("d",) if raw.get("include_treatment", True) else ()
    report = mc_study(
        config,
        estimators,
        n_reps=raw.get("reps", 100),
        seed=raw.get("seed", 0),
        treatments=treatments,
        lags=raw.get("lags"),
        n_jobs=args.jobs,
    )
    frame = report.to_frame()
    with np.printoptions(precision=4):
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    report.to_json(args.out_json)
    report.to_csv(args.out_csv)
    print(f"\nreports written to {args.out_json} and {args.out_csv}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return _run_estimate(args)
        return _run_mc(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"data error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as err:
        print(f"estimation error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_ESTIMATION
    except FileNotFoundError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
