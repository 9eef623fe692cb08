"""Experiment configs and the per-seed train / evaluate / report loop."""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .gaussian import (GaussianClassSpec, RNG_ALGORITHM, bayes_classifier, load_csv,
                       sample_dataset)
from .kernels import DEFAULT_GAMMA, KernelSpec
from .laws import EquilibriumReport, full_report
from .model import classify, default_bounds, fit, trace_level_sets
from .svg import render

DEFAULTS = {"C": None, "n_train": 200, "n_test": 10_000, "seeds": list(range(10)),
            "grid": {"resolution": 256, "pad_std": 3.0}, "svg": True}

REPORT_FIELDS = list(EquilibriumReport.__dataclass_fields__)
ROW_FIELDS = (["seed", "converged", "unbounded", "iterations", "kkt_stationarity",
               "error_rate", "error_std", "bayes_rate", "extreme_fraction", "l1", "l2"]
              + REPORT_FIELDS)
SUMMARY_FIELDS = ["error_rate", "bayes_rate", "extreme_fraction"]


class ConfigError(ValueError):
    """Config failed schema validation or references something missing."""


def _schema() -> dict:
    return json.loads(resources.files("eigenlocus").joinpath("schema/experiment.schema.json").read_text())


def bundled_names() -> list[str]:
    folder = resources.files("eigenlocus").joinpath("configs")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_config(ref: str) -> dict:
    """Read a config from a path, or by name from the bundled set."""
    path = Path(ref)
    if path.is_file():
        text, base = path.read_text(), path.parent
    elif ref in bundled_names():
        text = resources.files("eigenlocus").joinpath(f"configs/{ref}.json").read_text()
        base = Path.cwd()
    else:
        raise ConfigError(f"no config file or bundled config named {ref!r}; "
                          f"bundled: {', '.join(bundled_names())}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ref}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if isinstance(cfg, dict) and "dataset" in cfg and not os.path.isabs(cfg["dataset"]):
        cfg["dataset"] = str(base / cfg["dataset"])
    return cfg


def validate_config(cfg: dict) -> dict:
    """Schema check plus semantic checks; returns a copy with defaults filled in."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for e in errors:
            where = "/".join(str(p) for p in e.path) or "<root>"
            msgs.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))
    out = copy.deepcopy(DEFAULTS)
    for k, v in cfg.items():
        if k == "grid":
            out["grid"].update(v)
        else:
            out[k] = copy.deepcopy(v)
    out.setdefault("out", os.path.join("runs", cfg["name"]))
    try:
        KernelSpec(out["kernel"]["family"], float(out["kernel"].get("gamma", DEFAULT_GAMMA)))
        if "classes" in out:
            s1 = GaussianClassSpec(**out["classes"]["class1"])
            s2 = GaussianClassSpec(**out["classes"]["class2"])
            if s1.dim != s2.dim:
                raise ValueError("class dimensions differ")
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if "dataset" in out and not os.path.isfile(out["dataset"]):
        raise ConfigError(f"invalid config: dataset {out['dataset']!r} does not exist")
    return out


def config_C(cfg: dict) -> float | None:
    C = cfg.get("C")
    return math.inf if C == "inf" else (None if C is None else float(C))


def config_kernel(cfg: dict) -> KernelSpec:
    k = cfg["kernel"]
    return KernelSpec(k["family"], float(k.get("gamma", DEFAULT_GAMMA)))


def holdout_seed(seed: int) -> list[int]:
    # test draws use a substream disjoint from every training seed
    return [seed, 1]


@dataclass
class SeedResult:
    row: dict
    svg: str | None = None


@dataclass
class ExperimentResult:
    config: dict
    rows: list[dict]
    summary: dict
    elapsed: float
    files: list[str] = field(default_factory=list)

    @property
    def all_failed(self) -> bool:
        return not any(r["converged"] for r in self.rows)


def _empty_row(seed) -> dict:
    row = {k: "" for k in ROW_FIELDS}
    row["seed"] = seed
    return row


def run_seed(cfg: dict, seed: int, specs=None, data=None, make_svg: bool = False) -> SeedResult:
    """Train on one draw (or the given dataset), evaluate, and report."""
    kernel, C = config_kernel(cfg), config_C(cfg)
    if data is None:
        s1, s2 = specs
        data = sample_dataset(s1, s2, cfg["n_train"], cfg["n_train"], seed)
    run = fit(data.X, data.y, kernel, C)
    row = _empty_row(seed)
    sol = run.solution
    row.update(converged=int(sol.converged), unbounded=int(sol.unbounded),
               iterations=sol.iterations, kkt_stationarity=sol.kkt_stationarity,
               l1=run.extreme.l1, l2=run.extreme.l2,
               extreme_fraction=run.extreme.l / len(data.y))
    m = run.model
    if m is None:
        return SeedResult(row)
    if specs is not None:
        s1, s2 = specs
        n1 = cfg["n_test"] // 2
        test = sample_dataset(s1, s2, n1, cfg["n_test"] - n1, holdout_seed(seed))
        pred = classify(m, test.X)
        rate = float(np.mean(pred != test.y))
        row["bayes_rate"] = float(np.mean(bayes_classifier(s1, s2)(test.X) != test.y))
    else:
        rate = float(np.mean(classify(m, data.X) != data.y))
    row["error_rate"] = rate
    row["error_std"] = math.sqrt(rate * (1 - rate) / (cfg["n_test"] if specs else len(data.y)))
    row.update(full_report(m, run.gram).to_dict())
    svg = None
    if make_svg and m.dim == 2:
        grid = cfg["grid"]
        bounds = grid.get("bounds") or default_bounds(data.X, grid["pad_std"])
        traces = trace_level_sets(m, bounds, grid["resolution"])
        status = "" if sol.converged else " (not converged)"
        svg = render(data.X, data.y, traces, m.extreme_points,
                     title=f"{cfg['name']}  seed {seed}  error {rate:.2%}{status}")
    return SeedResult(row, svg)


def _quantiles(values):
    v = np.asarray([x for x in values if x != ""], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return float(med), float(q3 - q1)


def summarize(rows: list[dict]) -> dict:
    # non-converged rows are flagged by n_converged, not dropped
    out = {"n_seeds": len(rows), "n_converged": sum(1 for r in rows if r["converged"])}
    for key in SUMMARY_FIELDS:
        med, iqr = _quantiles(r[key] for r in rows)
        out[f"{key}_median"] = med
        out[f"{key}_iqr"] = iqr
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_text(path, text):
    # write beside the target then rename, so readers never see a partial file
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path, fields, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in fields})
    _write_text(path, buf.getvalue())


def run_experiment(cfg: dict, out_dir: str | None = None, write: bool = True) -> ExperimentResult:
    """Run every seed of a validated config and write CSV / SVG / JSON artifacts."""
    t0 = time.perf_counter()
    out_dir = out_dir or cfg["out"]
    specs = data = None
    if "classes" in cfg:
        specs = (GaussianClassSpec(**cfg["classes"]["class1"]),
                 GaussianClassSpec(**cfg["classes"]["class2"]))
        seeds = cfg["seeds"]
    else:
        data = load_csv(cfg["dataset"])
        seeds = [0]
    if write:
        os.makedirs(out_dir, exist_ok=True)
    rows, files = [], []
    for seed in seeds:
        res = run_seed(cfg, seed, specs=specs, data=data, make_svg=write and cfg["svg"])
        rows.append(res.row)
        if res.svg is not None:
            path = os.path.join(out_dir, f"seed{seed:03d}.svg")
            _write_text(path, res.svg)
            files.append(path)
    summary = summarize(rows)
    elapsed = time.perf_counter() - t0
    result = ExperimentResult(config=cfg, rows=rows, summary=summary, elapsed=elapsed, files=files)
    if write:
        seeds_csv = os.path.join(out_dir, "seeds.csv")
        _write_csv(seeds_csv, ROW_FIELDS, rows)
        summary_csv = os.path.join(out_dir, "summary.csv")
        stats = []
        for stat in ("median", "iqr"):
            stats.append({"statistic": stat, **{k: summary[f"{k}_{stat}"] for k in SUMMARY_FIELDS}})
        _write_csv(summary_csv, ["statistic"] + SUMMARY_FIELDS, stats)
        meta = {"config": cfg, "summary": summary, "rng": RNG_ALGORITHM,
                "n_train_per_class": cfg["n_train"], "gamma_default": DEFAULT_GAMMA}
        meta_path = os.path.join(out_dir, "summary.json")
        _write_text(meta_path, json.dumps(meta, indent=2, default=str) + "\n")
        files += [seeds_csv, summary_csv, meta_path]
    return result
