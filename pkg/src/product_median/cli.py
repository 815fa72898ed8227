"""Command-line front end.

Every flag mirrors a key of the optional JSON config file (dashes become
underscores); flags override the file, and the file overrides built-in defaults.
Failures print one JSON object on stderr and exit with

* 2 for a bad configuration (unknown keys, out-of-range values, missing files),
* 3 for a malformed dataset,
* 4 for a numerical failure.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .dataio import DatasetError, fmt, point_record, read_dataset, write_csv
from .errors import InvalidInput, ProductMedianError
from .frechet import product_mean
from .lab import UNIVARIATE, ContaminationSpec, breakdown_probe, cell_seed, make_rng, perturbation_probe, run_sweep, sample_univariate
from .plot import write_line_chart
from .product import WeightedSample
from .solvers import METHODS, SolverConfig, geometric_median

COMMANDS = ("median", "mean", "sweep-univariate", "sweep-multivariate", "breakdown", "perturbation")
EXIT_CONFIG, EXIT_DATASET, EXIT_NUMERIC = 2, 3, 4

DEFAULTS = {
    "input": None,
    "out": "out",
    "seed": 0,
    "alphas": [round(0.05 * i, 2) for i in range(10)],
    "n": None,  # 1000 for the univariate sweep, 200 multivariate, 50 for the probes
    "d": 5,
    "rho": 0.5,
    "trials": None,  # 5 for sweeps, 20 for the perturbation probe
    "method": None,  # hybrid for sweeps, weiszfeld otherwise
    "max_iters": 10_000,
    "tol": 1e-9,
    "svg": False,
    "wi": 0.4,
    "radii": [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6],
    "epsilons": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


CONVERTERS = {
    "input": str,
    "out": str,
    "seed": int,
    "alphas": _floats,
    "n": int,
    "d": int,
    "rho": float,
    "trials": int,
    "method": str,
    "max_iters": int,
    "tol": float,
    "svg": _bool,
    "wi": float,
    "radii": _floats,
    "epsilons": _floats,
}


def build_parser():
    p = _Parser(prog="product-median", description="Geometric medians on product manifolds.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON file whose keys mirror the flags")
    p.add_argument("--input", help="JSON Lines dataset (median, mean, optional for the probes)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", help="64-bit seed")
    p.add_argument("--alphas", help="comma-separated contamination levels")
    p.add_argument("--n", help="sample size")
    p.add_argument("--d", help="dimension of the multivariate scenario")
    p.add_argument("--rho", help="AR(1) correlation of the multivariate noise")
    p.add_argument("--trials", help="trials per contamination level or perturbation size")
    p.add_argument("--method", help="|".join(METHODS))
    p.add_argument("--max-iters", dest="max_iters", help="solver iteration cap")
    p.add_argument("--tol", help="first-order residual tolerance")
    p.add_argument("--svg", help="also write an SVG chart (true/false)")
    p.add_argument("--wi", help="contaminant weight for the breakdown probe")
    p.add_argument("--radii", help="comma-separated contaminant distances for the breakdown probe")
    p.add_argument("--epsilons", help="comma-separated perturbation sizes")
    return p


def resolve_config(argv):
    """Merge defaults, the config file and flags into a plain dict."""
    ns = build_parser().parse_args(argv)
    merged = dict(DEFAULTS)
    merged["command"] = None
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {ns.config} is not valid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(k.replace("-", "_") for k in data) - set(merged))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        merged.update({k.replace("-", "_"): v for k, v in data.items()})
    merged.update({k: v for k, v in vars(ns).items() if v is not None and k != "config"})
    for key, conv in CONVERTERS.items():
        if merged[key] is not None:
            try:
                merged[key] = conv(merged[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
    cmd = merged["command"]
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")
    sweep = cmd.startswith("sweep")
    if merged["n"] is None:
        merged["n"] = {"sweep-univariate": 1000, "sweep-multivariate": 200}.get(cmd, 50)
    if merged["trials"] is None:
        merged["trials"] = 5 if sweep else 20
    if merged["method"] is None:
        merged["method"] = "hybrid" if sweep else "weiszfeld"
    _validate(merged)
    return merged


def _validate(c):
    if c["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    if c["command"] in ("median", "mean") and not c["input"]:
        raise ConfigError(f"{c['command']} needs --input")
    if c["input"] and not os.path.isfile(c["input"]):
        raise ConfigError(f"input file not found: {c['input']}")
    if not 0 <= c["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for key in ("n", "trials", "max_iters", "d"):
        if c[key] < 1:
            raise ConfigError(f"{key} must be positive")
    if not c["tol"] > 0:
        raise ConfigError("tol must be positive")
    if not 0.0 < c["rho"] < 1.0:
        raise ConfigError("rho must lie in (0, 1)")
    if not 0.0 < c["wi"] < 1.0 or c["wi"] == 0.5:
        raise ConfigError("wi must lie in (0, 1) and differ from 0.5")
    if any(not (r >= 0 and math.isfinite(r)) for r in c["radii"]):
        raise ConfigError("radii must be finite and nonnegative")
    if any(not (e >= 0 and math.isfinite(e)) for e in c["epsilons"]):
        raise ConfigError("epsilons must be finite and nonnegative")


def _solver(c):
    return SolverConfig(method=c["method"], max_iters=c["max_iters"], tol_residual=c["tol"])


def _write_manifest(out, config, extra=None):
    doc = {"version": __version__, "seed": config["seed"], "config": config}
    doc.update(extra or {})
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _probe_sample(c):
    """Dataset from ``--input``, else ``n`` draws of the univariate signal law."""
    if c["input"]:
        return read_dataset(c["input"])
    rng = make_rng(cell_seed(c["seed"], 0, 0))
    return UNIVARIATE, WeightedSample(UNIVARIATE, sample_univariate("signal", rng, c["n"]))


def cmd_median(c):
    manifold, sample = read_dataset(c["input"])
    report = geometric_median(manifold, sample, cfg=_solver(c))
    with open(os.path.join(c["out"], "point.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(point_record(manifold, report.minimizer) + "\n")
    rows = [(k, f, r) for k, (f, r) in enumerate(zip(report.objective_trace, report.residual_trace))]
    write_csv(os.path.join(c["out"], "trace.csv"), ["iteration", "objective", "residual"], rows)
    return {
        "termination": str(report.termination),
        "objective": report.objective,
        "residual": report.residual,
        "iterations": report.iterations_used,
        "at_datum": report.at_datum,
    }


def cmd_mean(c):
    manifold, sample = read_dataset(c["input"])
    z = product_mean(manifold, sample)
    with open(os.path.join(c["out"], "point.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(point_record(manifold, z) + "\n")
    return {}


def cmd_sweep(c):
    multi = c["command"] == "sweep-multivariate"
    spec = ContaminationSpec(
        n=c["n"],
        alpha_grid=tuple(c["alphas"]),
        trials=c["trials"],
        seed=c["seed"],
        scenario="multivariate" if multi else "univariate",
        d=c["d"],
        rho=c["rho"],
    )
    result = run_sweep(spec, _solver(c))
    rows = [(r.alpha, r.trial, r.estimator, r.error, r.termination) for r in result.rows]
    write_csv(os.path.join(c["out"], "results.csv"), ["alpha", "trial", "estimator", "error", "termination"], rows)
    if c["svg"]:
        series = {e: sorted(result.mean_error(e).items()) for e in ("frechet_mean", "geometric_median")}
        title = f"d={spec.d}, rho={spec.rho}, n={spec.n}" if multi else f"univariate, n={spec.n}"
        write_line_chart(os.path.join(c["out"], "results.svg"), series, title=title, xlabel="alpha", ylabel="mean error")
    flagged = sum(r.termination in ("MaxIters", "NonConvergence") for r in result.rows)
    return {"nonconverged_rows": flagged}


def cmd_breakdown(c):
    manifold, clean = _probe_sample(c)
    res = breakdown_probe(manifold, clean, c["wi"], c["radii"], cfg=_solver(c))
    write_csv(os.path.join(c["out"], "results.csv"), ["R", "distance"], res.rows)
    if c["svg"]:
        write_line_chart(
            os.path.join(c["out"], "results.svg"), {f"W_I={fmt(c['wi'])}": res.rows},
            title="breakdown probe", xlabel="R", ylabel="distance to clean set",
        )
    return {"diameter": res.diameter, "bound": res.bound}


def cmd_perturbation(c):
    manifold, sample = _probe_sample(c)
    rng = make_rng(cell_seed(c["seed"], 1, 0))
    cfg = SolverConfig(method=c["method"], max_iters=c["max_iters"], tol_residual=min(c["tol"], 1e-12))
    res = perturbation_probe(manifold, sample, c["epsilons"], rng, trials=c["trials"], cfg=cfg)
    write_csv(os.path.join(c["out"], "results.csv"), ["epsilon", "displacement"], res.rows)
    if c["svg"]:
        pts = [(math.log10(e), math.log10(m)) for e, m in res.rows if e > 0 and m > 0]
        write_line_chart(
            os.path.join(c["out"], "results.svg"), {"median": pts},
            title="perturbation probe", xlabel="log10 epsilon", ylabel="log10 displacement",
        )
    return {"slope": res.slope, "in_uniqueness_ball": res.in_uniqueness_ball}


HANDLERS = {
    "median": cmd_median,
    "mean": cmd_mean,
    "sweep-univariate": cmd_sweep,
    "sweep-multivariate": cmd_sweep,
    "breakdown": cmd_breakdown,
    "perturbation": cmd_perturbation,
}


def _fail(code, kind, message, **extra):
    rec = {"error": kind, "message": message, "exit_code": code}
    rec.update(extra)
    sys.stderr.write(json.dumps(rec) + "\n")
    return code


def run(argv=None) -> int:
    try:
        config = resolve_config(sys.argv[1:] if argv is None else argv)
        os.makedirs(config["out"], exist_ok=True)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", f"cannot create output directory: {exc}")
    try:
        extra = HANDLERS[config["command"]](config)
        _write_manifest(config["out"], config, extra)
    except DatasetError as exc:
        return _fail(EXIT_DATASET, "DatasetError", str(exc), line=exc.line)
    except InvalidInput as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except (ProductMedianError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, "OSError", str(exc))
    return 0


def main():
    sys.exit(run())


__all__ = ["COMMANDS", "ConfigError", "build_parser", "main", "resolve_config", "run"]
