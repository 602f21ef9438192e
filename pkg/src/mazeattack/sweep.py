"""Parameter sweeps over one axis, with a flat CSV report and per-value medians."""

from __future__ import annotations

import copy
import csv
import math
import os
import traceback
from dataclasses import dataclass, field

import numpy as np

from .experiment import ATTACKS, ConfigError, ExperimentConfig, run_experiment, write_run_dir

AXES = ("Q", "m", "replay", "attack")
REPORT_VERSION = 1
REPORT_COLUMNS = (
    "version", "attack", "axis", "value", "config_hash", "seed", "status",
    "final_q", "clone_acc", "target_acc", "norm_acc", "wall_time", "error",
)


@dataclass
class SweepSpec:
    axis: str
    values: list
    repeats: int = 1
    attack: str = "maze"
    base: ExperimentConfig = field(default_factory=ExperimentConfig)
    first_seed: int = 0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; expected one of {AXES}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        self.values = [parse_value(self.axis, v) for v in self.values]
        if self.axis != "attack" and self.attack not in ATTACKS:
            raise ConfigError(f"unknown attack {self.attack!r}")

    def runs(self):
        """(value, seed, attack kind, config) for every run, in a fixed order."""
        for value in self.values:
            for r in range(self.repeats):
                seed = self.first_seed + r
                kind, cfg = apply_axis(self.base, self.axis, value, self.attack)
                yield value, seed, kind, cfg.with_seed(seed)


def parse_value(axis, v):
    if axis == "Q":
        q = int(float(v))
        if q < 0:
            raise ConfigError(f"budget value must be non-negative, got {v!r}")
        return q
    if axis == "m":
        m = int(v)
        if m < 1:
            raise ConfigError(f"m value must be at least 1, got {v!r}")
        return m
    if axis == "replay":
        s = str(v).lower()
        if s in ("on", "true", "1"):
            return "on"
        if s in ("off", "false", "0"):
            return "off"
        raise ConfigError(f"replay value must be on or off, got {v!r}")
    if v not in ATTACKS:
        raise ConfigError(f"unknown attack {v!r}; expected one of {ATTACKS}")
    return v


def apply_axis(base, axis, value, attack):
    cfg = copy.deepcopy(base)
    kind = attack
    if axis == "Q":
        cfg.attack.budget = value
    elif axis == "m":
        cfg.attack.m = value
    elif axis == "replay":
        if value == "off":
            cfg.attack.n_replay = 0
        elif cfg.attack.n_replay == 0:
            cfg.attack.n_replay = 10
    else:
        kind = value
    # re-run validation on the edited section
    cfg.attack = type(cfg.attack).from_dict(cfg.attack.to_dict())
    return kind, cfg


class Report:
    def __init__(self, rows=None):
        self.rows = list(rows or [])

    def add(self, row):
        self.rows.append({c: row.get(c, "") for c in REPORT_COLUMNS})

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r["config_hash"], int(r["seed"])))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
            w.writeheader()
            for r in self.sorted_rows():
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in REPORT_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"{path}: report is missing column {missing[0]}")
            rows = []
            for r in reader:
                if int(r["version"]) != REPORT_VERSION:
                    raise ValueError(f"{path}: unsupported report version {r['version']}")
                for c in ("final_q", "clone_acc", "target_acc", "norm_acc", "wall_time"):
                    r[c] = float(r[c]) if r[c] not in ("", None) else math.nan
                r["seed"] = int(r["seed"])
                rows.append(r)
        return cls(rows)

    def summary(self):
        """Median normalised accuracy per (attack, value) over successful runs."""
        groups = {}
        for r in self.rows:
            key = (r["attack"], str(r["value"]))
            g = groups.setdefault(key, {"attack": r["attack"], "value": str(r["value"]), "ok": [], "failed": 0})
            if r["status"] == "ok":
                g["ok"].append(float(r["norm_acc"]))
            else:
                g["failed"] += 1
        out = []
        for _, g in sorted(groups.items(), key=lambda kv: (kv[0][0], _value_key(kv[0][1]))):
            vals = np.array(g["ok"])
            out.append({
                "attack": g["attack"],
                "value": g["value"],
                "runs": len(vals),
                "failed": g["failed"],
                "median_norm_acc": float(np.median(vals)) if len(vals) else math.nan,
                "mad_norm_acc": float(np.median(np.abs(vals - np.median(vals)))) if len(vals) else math.nan,
            })
        return out

    def format_summary(self):
        lines = [f"{'attack':<14}{'value':>10}{'runs':>6}{'failed':>8}{'median':>10}{'mad':>10}"]
        for s in self.summary():
            lines.append(
                f"{s['attack']:<14}{s['value']:>10}{s['runs']:>6}{s['failed']:>8}"
                f"{s['median_norm_acc']:>10.4f}{s['mad_norm_acc']:>10.4f}"
            )
        return "\n".join(lines)


def _value_key(v):
    try:
        return (0, float(v), "")
    except ValueError:
        return (1, 0.0, v)


def run_sweep(spec, bundle, out_dir=None, runner=None):
    """Run every (value, seed) pair in isolation; a failing run yields a failure row."""
    runner = runner or run_experiment
    report = Report()
    for value, seed, kind, cfg in spec.runs():
        row = {
            "version": REPORT_VERSION, "attack": kind, "axis": spec.axis, "value": value,
            "config_hash": cfg.hash(kind), "seed": seed, "target_acc": bundle.test_acc,
        }
        try:
            result = runner(kind, cfg, bundle)
            final = result.log.final
            row.update(status="ok", final_q=result.queries, clone_acc=final["clone_acc"],
                       norm_acc=final["clone_acc"] / bundle.test_acc, wall_time=result.wall_time)
            if out_dir is not None:
                write_run_dir(os.path.join(out_dir, "runs", f"{row['config_hash']}-s{seed}"), kind, cfg, bundle, result)
        except Exception as exc:  # noqa: BLE001 - every failure becomes a report row
            row.update(status="failed", final_q=math.nan, clone_acc=math.nan, norm_acc=math.nan,
                       wall_time=math.nan, error=f"{type(exc).__name__}: {exc}".replace("\n", " "))
            if os.environ.get("MAZEATTACK_DEBUG"):
                traceback.print_exc()
        report.add(row)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        report.to_csv(os.path.join(out_dir, "report.csv"))
        write_summary_csv(report, os.path.join(out_dir, "summary.csv"))
    return report


def write_summary_csv(report, path):
    cols = ("attack", "value", "runs", "failed", "median_norm_acc", "mad_norm_acc")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for s in report.summary():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in s.items()})
