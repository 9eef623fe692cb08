"""Command-line front end.

Exit codes: 0 success, 2 bad config or arguments, 3 no seed (or the single
training run) converged.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .experiments import (ConfigError, bundled_names, load_config, run_experiment,
                          validate_config)
from .gaussian import load_csv
from .kernels import DEFAULT_GAMMA, KernelSpec, build_gram, epsilon_from_C
from .laws import full_report
from .model import ModelFormatError, discriminant_value, fit, load_model, save_model

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 2, 3


def _parse_C(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        C = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"C must be a positive number or 'inf', got {text!r}")
    if not C > 0:
        raise argparse.ArgumentTypeError("C must be positive")
    return C


def _kernel_flags(p: argparse.ArgumentParser, default_family=None):
    p.add_argument("--kernel", choices=("linear", "poly2", "gaussian"), default=default_family)
    p.add_argument("--gamma", type=float, default=None,
                   help=f"gaussian width (default {DEFAULT_GAMMA})")
    p.add_argument("--C", type=_parse_C, default=None,
                   help="penalty, or 'inf' for no ridge (default: 50 when n > d, else inf)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eigenlocus",
                                 description="Kernel minimum-risk classifier and Gaussian experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config (path or bundled name)")
    p.add_argument("--config", required=True,
                   help="config file, or one of: " + ", ".join(bundled_names()))
    _kernel_flags(p)
    p.add_argument("--seed", type=int, action="append",
                   help="run only this seed (repeatable)")
    p.add_argument("--out", help="output directory (default runs/<name>)")
    p.add_argument("--no-svg", action="store_true", help="skip the per-seed plots")

    p = sub.add_parser("train", help="train a model on a CSV of features..., label")
    p.add_argument("--data", required=True)
    _kernel_flags(p, default_family="linear")
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("classify", help="label the rows of a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="predictions CSV (default stdout)")

    p = sub.add_parser("report", help="equilibrium report of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="training CSV, used for the dominant eigenvalue of Q")
    p.add_argument("--out", help="write the JSON report here as well")
    return ap


def _apply_overrides(cfg: dict, args) -> dict:
    if args.kernel:
        cfg["kernel"] = {"family": args.kernel}
    if args.gamma is not None:
        cfg.setdefault("kernel", {"family": "gaussian"})["gamma"] = args.gamma
    if args.C is not None:
        cfg["C"] = "inf" if math.isinf(args.C) else args.C
    if args.seed:
        cfg["seeds"] = args.seed
    if args.out:
        cfg["out"] = args.out
    if args.no_svg:
        cfg["svg"] = False
    return cfg


def cmd_run(args) -> int:
    cfg = validate_config(_apply_overrides(load_config(args.config), args))
    res = run_experiment(cfg)
    s = res.summary
    print(f"{cfg['name']}: {s['n_converged']}/{s['n_seeds']} seeds converged, "
          f"median error {s['error_rate_median']:.4f} (IQR {s['error_rate_iqr']:.4f}), "
          f"median Bayes {s['bayes_rate_median']:.4f}, "
          f"median extreme fraction {s['extreme_fraction_median']:.4f}, "
          f"{res.elapsed:.1f} s -> {cfg['out']}")
    for r in res.rows:
        if not r["converged"]:
            why = "dual unbounded" if r["unbounded"] else "iteration cap"
            print(f"  seed {r['seed']}: not converged ({why})", file=sys.stderr)
    return EXIT_NOT_CONVERGED if res.all_failed else EXIT_OK


def _kernel_from_args(args) -> KernelSpec:
    gamma = DEFAULT_GAMMA if args.gamma is None else args.gamma
    return KernelSpec(args.kernel, gamma)


def cmd_train(args) -> int:
    data = load_csv(args.data)
    run = fit(data.X, data.y, _kernel_from_args(args), args.C)
    if run.model is None:
        print("error: extreme set is one-sided; no model written", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    save_model(run.model, args.out)
    sol = run.solution
    print(f"{run.model.l} extreme points ({run.model.l1} / {run.model.l2}), "
          f"kappa0 {run.model.kappa0:.6g}, stationarity {sol.kkt_stationarity:.2e}, "
          f"{sol.iterations} iterations -> {args.out}")
    if not sol.converged:
        print("warning: solver did not converge" + (" (dual unbounded)" if sol.unbounded else ""),
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _read_features(path, dim):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        [float(v) for v in rows[0]]
    except (ValueError, IndexError):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    A = np.array(rows, dtype=float)
    if A.shape[1] == dim + 1:
        return A[:, :dim]
    if A.shape[1] != dim:
        raise ValueError(f"{path}: {A.shape[1]} columns, model expects {dim} features "
                         f"(optionally followed by a label)")
    return A


def cmd_classify(args) -> int:
    m = load_model(args.model)
    X = _read_features(args.data, m.dim)
    d = discriminant_value(m, X)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(m.dim)] + ["predicted_label", "discriminant_value"])
        for row, v in zip(X, d):
            w.writerow([repr(float(a)) for a in row] + [1 if v >= 0 else -1, repr(float(v))])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_report(args) -> int:
    m = load_model(args.model)
    gram = None
    if args.data:
        data = load_csv(args.data)
        if data.X.shape[1] != m.dim:
            raise ValueError(f"data has {data.X.shape[1]} features, model has {m.dim}")
        gram = build_gram(data.X, data.y, m.kernel, epsilon_from_C(m.C))
    rep = full_report(m, gram).to_dict()
    text = json.dumps(rep, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    width = max(map(len, rep))
    for k, v in rep.items():
        print(f"{k:<{width}}  {v: .6e}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "train": cmd_train, "classify": cmd_classify, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
