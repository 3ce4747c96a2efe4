"""Command-line entry point: ``paretofair {train,trace,frontier,eval,check-grads}``.

Settings resolve in increasing priority: built-in defaults, ``--config`` file,
``PARETOFAIR_*`` environment variables, then command-line flags.  Every run
directory receives its resolved ``config.json``.  Errors exit with 2 (usage),
3 (data) or 4 (numeric) and print a one-line JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .data_io import FeatureEncoder, apply_schema_to_test, resolve_schema
from .errors import NumericError, ParetoFairError, UsageError
from .experiments import Outcome, RunConfig, run_sweep, run_trace, run_train, synthetic_bundle
from .fairness import evaluate_metrics
from .frontier import FrontierSet, merge_runs, non_dominated_filter
from .objectives import finite_difference_check

log = logging.getLogger("paretofair")

ENV_PREFIX = "PARETOFAIR_"
GRAD_TOL = 1e-5

# flag dest -> RunConfig field, with the converter used for env values
_FIELDS = {
    "data": str, "test": str, "schema": str, "notion": str, "model": str,
    "eta": float, "rho": str, "inner_steps": int, "iters": int, "eps1": float,
    "eps2": float, "seed": int, "out": str, "synthetic": bool,
    "normalize_gradients": bool, "workers": int, "record_every": int,
    "test_fraction": float, "penalty": str, "l2": float,
}


def _fmt(v) -> str:
    return "" if v is None else f"{float(v):.17g}"


def _onoff(text: str) -> bool:
    value = text.strip().lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise UsageError(f"expected on/off, got {text!r}")


def _rho(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"rho must be a positive number or 'auto', got {text!r}") from exc


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with RunConfig keys")
    common.add_argument("--data", help="training CSV (or the single file to split)")
    common.add_argument("--test", help="test CSV; without it the data file is split")
    common.add_argument("--schema", help="bundled schema name or path to a schema YAML")
    common.add_argument("--notion", choices=("eo", "eod", "dm"))
    common.add_argument("--model", choices=("logistic", "svm"))
    common.add_argument("--penalty", choices=("squared", "abs"))
    common.add_argument("--l2", type=float)
    common.add_argument("--pref", action="append", dest="prefs", help='preference vector "a,b,..." (repeatable)')
    common.add_argument("--eta", type=float, help="outer step size")
    common.add_argument("--rho", help="inner step size or 'auto'")
    common.add_argument("--inner-steps", type=int, dest="inner_steps")
    common.add_argument("--iters", type=int, help="outer iteration budget T")
    common.add_argument("--eps1", type=float)
    common.add_argument("--eps2", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--synthetic", action="store_const", const=True, default=None,
                        help="use the two-Gaussian benchmark instead of a dataset")
    common.add_argument("--normalize-gradients", dest="normalize_gradients", type=_onoff, metavar="{on,off}")
    common.add_argument("--record-every", type=int, dest="record_every")
    common.add_argument("--test-fraction", type=float, dest="test_fraction")
    common.add_argument("--workers", type=int, help="threads for frontier sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="paretofair", description="Pareto descent for fair classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="Pareto descent to one stationary point")
    sub.add_parser("trace", parents=[common], help="preference-steered descent for one preference")
    sub.add_parser("frontier", parents=[common], help="sweep preferences and merge a frontier")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a saved model on a data file")
    ev.add_argument("model_path", help="model.json written by train or trace")
    sub.add_parser("check-grads", parents=[common], help="finite-difference check of every objective")
    return parser


def _load_config_file(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise UsageError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must hold a mapping")
    return raw


def _env_overrides(environ) -> dict:
    out = {}
    for name, conv in _FIELDS.items():
        key = ENV_PREFIX + name.upper()
        if key not in environ:
            continue
        text = environ[key]
        try:
            out[name] = _onoff(text) if conv is bool else conv(text)
        except ValueError as exc:
            raise UsageError(f"{key}={text!r} is not a valid {conv.__name__}") from exc
    if ENV_PREFIX + "PREFS" in environ:
        out["prefs"] = [p for p in environ[ENV_PREFIX + "PREFS"].split(";") if p]
    return out


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    merged = {}
    if args.config:
        merged.update(_load_config_file(args.config))
    merged.update(_env_overrides(environ))
    for name in [*_FIELDS, "prefs"]:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if "rho" in merged:
        merged["rho"] = _rho(merged["rho"])
    return RunConfig.from_dict(merged)


# --- artifacts ---------------------------------------------------------------


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_trajectory(path: Path, outcome: Outcome) -> None:
    traj = outcome.result.trajectory
    m = outcome.bundle.m
    n_alpha = max((p.alpha.size for p in traj if p.alpha is not None), default=m)
    header = ["iteration", "mode", *[f"h_{i}" for i in range(m)], "direction_norm",
              *[f"alpha_{i}" for i in range(n_alpha)]]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p in traj:
            alpha = [] if p.alpha is None else list(p.alpha)
            alpha += [None] * (n_alpha - len(alpha))
            writer.writerow([p.iteration, p.mode, *map(_fmt, p.objective_values), _fmt(p.direction_norm),
                             *map(_fmt, alpha)])


def write_run(outdir: Path, cfg: RunConfig, outcome: Outcome) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_trajectory(outdir / "trajectory.csv", outcome)
    model = {
        "weights": [float(v) for v in outcome.result.w],
        "objectives": outcome.bundle.names,
        "iterations": outcome.result.iterations,
        "converged": outcome.result.converged,
        "version": __version__,
    }
    if outcome.train is not None:
        model.update(
            feature_names=list(outcome.train.feature_names),
            group_names=list(outcome.train.group_names),
            schema=cfg.schema,
            encoder=outcome.train.encoder.to_dict() if outcome.train.encoder else None,
        )
    _write_json(outdir / "model.json", model)
    _write_json(outdir / "metrics.json", outcome.metrics())
    _write_json(outdir / "config.json", {**cfg.to_dict(), "version": __version__})


def write_frontier(outdir: Path, front: FrontierSet, outcomes: list[Outcome]) -> tuple[int, int]:
    front = front.sorted()
    m = front.objective_dim
    with (outdir / "frontier_loss.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "iteration", *[f"h_{i}" for i in range(m)]])
        for p in front.points:
            writer.writerow([p.run, p.iteration, *map(_fmt, p.values)])

    data = next((o.test if o.test is not None else o.train for o in outcomes if o.train is not None), None)
    if data is None:
        return len(front), 0
    pairs = []
    for p in front.points:
        met = evaluate_metrics(p.w, data)
        pairs.append((met.error, met.deo))
    keep = non_dominated_filter(np.array(pairs)) if pairs else []
    rows = sorted((pairs[i][0], pairs[i][1], front.points[i].run, front.points[i].iteration) for i in keep)
    with (outdir / "frontier_metrics.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "iteration", "error", "deo"])
        for err, deo, run, it in rows:
            writer.writerow([run, it, f"{err:.6g}", f"{deo:.6g}"])
    return len(front), len(rows)


# --- commands ----------------------------------------------------------------


def cmd_train(cfg: RunConfig) -> Path:
    outcome = run_train(cfg)
    out = Path(cfg.out)
    write_run(out, cfg, outcome)
    _report(outcome)
    return out


def cmd_trace(cfg: RunConfig) -> Path:
    outcome = run_trace(cfg)
    out = Path(cfg.out)
    write_run(out, cfg, outcome)
    h = outcome.result.trajectory[-1].objective_values
    scaled = outcome.pref.pi * h
    for i in range(len(h)):
        for j in range(i + 1, len(h)):
            print(f"residual |pi_{i} h_{i} - pi_{j} h_{j}| = {abs(scaled[i] - scaled[j]):.6g}")
    _report(outcome)
    return out


def cmd_frontier(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", {**cfg.to_dict(), "version": __version__})
    try:
        outcomes = run_sweep(cfg)
    except ParetoFairError as exc:
        _write_json(out / "sweep_status.json", {"complete": False, "error": str(exc)})
        raise
    for o in outcomes:
        write_run(out / o.tag, dataclasses.replace(cfg, prefs=[",".join(f"{v:g}" for v in o.pref.pi)]), o)
    front = merge_runs([o.result for o in outcomes], [o.tag for o in outcomes])
    n_loss, n_metric = write_frontier(out, front, outcomes)
    _write_json(out / "sweep_status.json", {"complete": True, "runs": [o.tag for o in outcomes],
                                            "loss_points": n_loss, "metric_points": n_metric})
    print(f"frontier: {n_loss} non-dominated loss points, {n_metric} in error/DEO space")
    return out


def cmd_eval(cfg: RunConfig, model_path) -> Path:
    try:
        model = json.loads(Path(model_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read model {model_path}: {exc}") from exc
    if not model.get("encoder"):
        raise UsageError("model has no encoder record (synthetic models cannot be evaluated on data)")
    if cfg.data is None:
        raise UsageError("eval needs --data")
    schema = resolve_schema(model.get("schema", cfg.schema))
    data = apply_schema_to_test(cfg.data, FeatureEncoder.from_dict(model["encoder"]), schema)
    w = np.asarray(model["weights"], dtype=float)
    if w.size != data.d:
        raise UsageError(f"model has {w.size} weights but the data encodes to {data.d} features")
    metrics = evaluate_metrics(w, data).to_dict()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "metrics.json", metrics)
    print(f"accuracy {metrics['accuracy']:.6f}  DEO {metrics['deo']:.6f}")
    return out


def cmd_check_grads(cfg: RunConfig) -> float:
    if cfg.synthetic:
        bundle = synthetic_bundle()
    else:
        from .experiments import load_datasets
        from .fairness import build_objectives

        bundle = build_objectives(cfg.notion, cfg.model_spec(), load_datasets(cfg)[0], cfg.penalty)
    w = np.random.default_rng(cfg.seed).normal(0.0, 0.5, bundle.d)
    worst = 0.0
    for i in range(bundle.m):
        err = finite_difference_check(bundle[i], w)
        worst = max(worst, err)
        print(f"{bundle.names[i]}: max relative error {err:.3e}")
    if worst > GRAD_TOL:
        raise NumericError(f"gradient check failed: {worst:.3e} > {GRAD_TOL:g}")
    return worst


def _report(outcome: Outcome) -> None:
    res = outcome.result
    last = res.trajectory[-1]
    print(f"iterations {res.iterations}  converged {res.converged}  |d| {last.direction_norm:.3e}")
    metrics = outcome.metrics()
    for split in ("train", "test"):
        if split in metrics:
            print(f"{split}: accuracy {metrics[split]['accuracy']:.6f}  DEO {metrics[split]['deo']:.6f}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            cmd_train(cfg)
        elif args.command == "trace":
            cmd_trace(cfg)
        elif args.command == "frontier":
            cmd_frontier(cfg)
        elif args.command == "eval":
            cmd_eval(cfg, args.model_path)
        else:
            cmd_check_grads(cfg)
    except ParetoFairError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(record), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
