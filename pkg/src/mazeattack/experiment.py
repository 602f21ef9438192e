"""Run configuration, target construction, and a single entry point for every attack."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .baselines import JbdaConfig, SurrogateConfig, run_jbda, run_noise, run_surrogate
from .data import DatasetSpec, make_dataset, surrogate_spec
from .maze import AttackConfig, AttackState, WhiteBoxEstimator, run_attack, run_maze_whitebox
from .metrics import EvalSet
from .nn import load_checkpoint, save_checkpoint
from .oracle import BlackBoxOracle, TargetSpec, train_target
from .pd import PdConfig, PdState, SeedSet, run_maze_pd

ATTACKS = ("maze", "maze-pd", "jbda", "noise", "surrogate", "maze-whitebox")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} section: {exc}") from exc


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    target: TargetSpec = field(default_factory=TargetSpec)
    attack: AttackConfig = field(default_factory=AttackConfig)
    pd: PdConfig = field(default_factory=PdConfig)
    jbda: JbdaConfig = field(default_factory=JbdaConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    # number of unlabelled training inputs handed to the partial-data attacks
    seed_inputs: int = 100

    SECTIONS = {
        "dataset": DatasetSpec,
        "target": TargetSpec,
        "attack": AttackConfig,
        "pd": PdConfig,
        "jbda": JbdaConfig,
        "surrogate": SurrogateConfig,
    }

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key in raw:
            if key not in cls.SECTIONS and key != "seed_inputs":
                raise ConfigError(f"unknown key {key}")
        kw = {name: _section(kind, raw.get(name), name) for name, kind in cls.SECTIONS.items()}
        seed_inputs = raw.get("seed_inputs", 100)
        if not isinstance(seed_inputs, int) or seed_inputs < 1:
            raise ConfigError("seed_inputs must be a positive integer")
        return cls(seed_inputs=seed_inputs, **kw)

    def to_dict(self):
        out = {}
        for name in self.SECTIONS:
            d = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        out["seed_inputs"] = self.seed_inputs
        return out

    def with_seed(self, seed):
        """Copy with every attack-side seed set to ``seed``; the target is untouched."""
        cfg = copy.deepcopy(self)
        cfg.attack.seed = seed
        cfg.jbda.seed = seed
        cfg.surrogate.seed = seed
        return cfg

    def hash(self, attack_kind=""):
        """Short digest of the configuration with the attack seed blanked out."""
        d = self.to_dict()
        for name in ("attack", "jbda", "surrogate"):
            d[name]["seed"] = None
        blob = json.dumps({"kind": attack_kind, "config": d}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def load_config(path):
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(raw)


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- target ----------------------------------------------------------------


@dataclass
class TargetBundle:
    dataset: object
    model: object
    test_acc: float
    dataset_id: str

    @property
    def eval_set(self):
        return EvalSet.from_dataset(self.dataset, self.test_acc)


def dataset_id(spec):
    blob = json.dumps(asdict(spec), sort_keys=True)
    return f"{spec.kind}-{hashlib.sha256(blob.encode()).hexdigest()[:10]}"


def build_target(cfg):
    ds = make_dataset(cfg.dataset)
    model, acc = train_target(cfg.target, ds)
    return TargetBundle(ds, model, acc, dataset_id(cfg.dataset))


def save_target(bundle, cfg, out_dir):
    """Write ``target.ckpt`` and a ``target.json`` manifest into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, "target.ckpt")
    save_checkpoint(bundle.model, ckpt)
    manifest = {
        "dataset_id": bundle.dataset_id,
        "dataset": cfg.to_dict()["dataset"],
        "target": cfg.to_dict()["target"],
        "seed": cfg.target.seed,
        "test_acc": bundle.test_acc,
        "checkpoint": "target.ckpt",
    }
    with open(os.path.join(out_dir, "target.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_target(target_dir, cfg=None):
    """Load a saved target; the dataset is rebuilt from the manifest's spec."""
    with open(os.path.join(target_dir, "target.json")) as fh:
        manifest = json.load(fh)
    spec = _section(DatasetSpec, manifest["dataset"], "dataset")
    if cfg is not None and dataset_id(cfg.dataset) != manifest["dataset_id"]:
        raise ConfigError(
            f"dataset in config ({dataset_id(cfg.dataset)}) does not match target manifest ({manifest['dataset_id']})"
        )
    model, _ = load_checkpoint(os.path.join(target_dir, manifest["checkpoint"]))
    return TargetBundle(make_dataset(spec), model, float(manifest["test_acc"]), manifest["dataset_id"])


# -- attacks ---------------------------------------------------------------


@dataclass
class RunResult:
    kind: str
    clone: object
    log: object
    queries: int
    wall_time: float
    extras: dict = field(default_factory=dict)


def seed_set(cfg, bundle):
    rng = np.random.default_rng([cfg.dataset.seed, 4242])
    return SeedSet.from_dataset(bundle.dataset, cfg.seed_inputs, rng)


def _reference(bundle, state, cfg, extra=None):
    wb = WhiteBoxEstimator(bundle.model, None, cfg.attack.m)
    wb.clone = state.C

    def exact(x_p):
        return wb.exact(x_p, extra)[0]

    return exact


def run_experiment(kind, cfg, bundle, trace=None, seeds=None):
    """Run one attack against ``bundle``'s target with a fresh oracle sized to the budget."""
    if kind not in ATTACKS:
        raise ConfigError(f"unknown attack {kind!r}; expected one of {ATTACKS}")
    budget = cfg.attack.budget
    oracle = BlackBoxOracle(bundle.model, budget=budget)
    ev = bundle.eval_set
    t0 = time.perf_counter()
    extras = {}
    if kind in ("maze", "maze-pd"):
        state = AttackState(cfg.attack, oracle.input_dim, oracle.output_dim)
        if kind == "maze":
            ref = _reference(bundle, state, cfg) if trace is not None else None
            clone, log = run_attack(oracle, cfg.attack, ev, state=state, trace=trace, reference=ref)
        else:
            seeds = seeds if seeds is not None else seed_set(cfg, bundle)
            pd_state = PdState(state, seeds, cfg.pd)
            ref = None
            if trace is not None:
                lam = cfg.pd.lambda_wgan
                ref = _reference(bundle, state, cfg, lambda x: pd_state.D(x).reshape(-1) * (-lam))
            clone, log = run_maze_pd(oracle, seeds, cfg.attack, cfg.pd, ev, state=state, pd_state=pd_state,
                                     trace=trace, reference=ref)
    elif kind == "maze-whitebox":
        clone, log = run_maze_whitebox(bundle.model, cfg.attack, ev, oracle=oracle)
    elif kind == "noise":
        clone, log = run_noise(oracle, cfg.attack, ev)
    elif kind == "jbda":
        pool = bundle.dataset.x_train if seeds is None else getattr(seeds, "x", seeds)
        clone, log, sizes = run_jbda(oracle, pool, cfg.jbda, ev)
        extras["pool_sizes"] = sizes
    else:
        sur = make_dataset(surrogate_spec(cfg.dataset, cfg.surrogate.kind))
        clone, log = run_surrogate(oracle, sur.x_train, cfg.surrogate, ev)
        extras["surrogate_size"] = len(sur.x_train)
    return RunResult(kind, clone, log, oracle.ledger.q, time.perf_counter() - t0, extras)


def write_run_dir(out_dir, kind, cfg, bundle, result, trace=None):
    """Config echo, log CSV, clone checkpoint, target manifest, and a run summary."""
    os.makedirs(out_dir, exist_ok=True)
    save_config(cfg, os.path.join(out_dir, "config.json"))
    result.log.to_csv(os.path.join(out_dir, "log.csv"))
    save_checkpoint(result.clone, os.path.join(out_dir, "clone.ckpt"),
                    meta={"attack": kind, "queries": result.queries})
    if not os.path.exists(os.path.join(out_dir, "target.json")):
        save_target(bundle, cfg, out_dir)
    if trace is not None:
        with open(os.path.join(out_dir, "zo_trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "cosine"])
            for row in trace:
                w.writerow([row["q"], repr(row["cosine"])])
    summary = {
        "attack": kind,
        "config_hash": cfg.hash(kind),
        "seed": cfg.attack.seed,
        "iterations": result.log.iterations,
        "queries": result.queries,
        "truncated": result.log.truncated,
        "clone_acc": result.log.final["clone_acc"],
        "norm_acc": result.log.final["norm_acc"],
        "target_acc": bundle.test_acc,
        "wall_time": result.wall_time,
        **result.extras,
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def apply_overrides(cfg, section, **values):
    """Replace fields of one section, skipping ``None`` values."""
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    cfg = copy.deepcopy(cfg)
    setattr(cfg, section, replace(getattr(cfg, section), **values))
    return cfg
