"""Command-line entry point: ``mazeattack <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiment import (
    ConfigError,
    apply_overrides,
    build_target,
    load_config,
    load_target,
    run_experiment,
    save_config,
    save_target,
    write_run_dir,
)
from .metrics import agreement_rate, clone_accuracy, normalized_accuracy
from .nn import load_checkpoint
from .pd import SeedSet
from .sweep import AXES, Report, SweepSpec, run_sweep, write_summary_csv

ATTACK_KINDS = ("maze", "maze-pd", "jbda", "noise", "surrogate")


def _add_config(p):
    p.add_argument("--config", help="JSON run configuration (see README for the schema)")


def _add_target(p):
    p.add_argument("--target", help="directory holding target.ckpt and target.json; trained from the config if omitted")


def _add_attack_flags(p):
    g = p.add_argument_group("attack overrides")
    g.add_argument("--budget", type=int)
    g.add_argument("--B", type=int, dest="batch_size")
    g.add_argument("--m", type=int)
    g.add_argument("--NG", type=int, dest="n_gen")
    g.add_argument("--NC", type=int, dest="n_clone")
    g.add_argument("--NR", type=int, dest="n_replay")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--lr-gen", type=float, dest="lr_gen")
    g.add_argument("--lr-clone", type=float, dest="lr_clone")
    g.add_argument("--log-every", type=int, dest="log_every")
    g.add_argument("--seed", type=int)


ATTACK_FLAGS = ("budget", "batch_size", "m", "n_gen", "n_clone", "n_replay", "epsilon", "lr_gen", "lr_clone",
                "log_every")


def build_parser():
    parser = argparse.ArgumentParser(prog="mazeattack", description="Model-extraction attacks on a simulated black box.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-target", help="train a target classifier and write its checkpoint and manifest")
    _add_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="target training seed")

    p = sub.add_parser("attack", help="run one attack and write a run directory")
    p.add_argument("kind", choices=ATTACK_KINDS)
    _add_config(p)
    _add_target(p)
    _add_attack_flags(p)
    p.add_argument("--seeds-file", help="seed inputs for maze-pd/jbda (.csv, or binary n,d header + f64 rows)")
    p.add_argument("--trace", action="store_true", help="write zo_trace.csv with cosines to the exact gradient")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="sweep one axis over values and seeds")
    _add_config(p)
    _add_target(p)
    _add_attack_flags(p)
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--attack", default="maze", help="attack kind for non-attack axes")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="measure a clone checkpoint against the target (spends no queries)")
    _add_config(p)
    _add_target(p)
    p.add_argument("--clone", required=True)

    p = sub.add_parser("report", help="print per-value medians from a sweep report")
    p.add_argument("report")
    p.add_argument("--out", help="also write the summary table as CSV")
    return parser


def _config(args):
    cfg = load_config(args.config)
    if hasattr(args, "budget"):
        cfg = apply_overrides(cfg, "attack", **{k: getattr(args, k) for k in ATTACK_FLAGS})
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    return cfg


def _target(args, cfg):
    if args.target:
        return load_target(args.target, cfg)
    return build_target(cfg)


def cmd_train_target(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = apply_overrides(cfg, "target", seed=args.seed)
    bundle = build_target(cfg)
    manifest = save_target(bundle, cfg, args.out)
    save_config(cfg, os.path.join(args.out, "config.json"))
    print(f"target test accuracy {manifest['test_acc']:.4f} ({manifest['dataset_id']}) -> {args.out}")
    return 0


def cmd_attack(args):
    cfg = _config(args)
    bundle = _target(args, cfg)
    seeds = SeedSet.load(args.seeds_file) if args.seeds_file else None
    trace = [] if args.trace else None
    result = run_experiment(args.kind, cfg, bundle, trace=trace, seeds=seeds)
    os.makedirs(args.out, exist_ok=True)
    if args.target:
        save_target(bundle, cfg, args.out)
    summary = write_run_dir(args.out, args.kind, cfg, bundle, result, trace=trace)
    loop = f"{summary['iterations']} iterations, " if args.kind.startswith("maze") else ""
    print(
        f"{args.kind}: {loop}{summary['queries']} queries, "
        f"clone acc {summary['clone_acc']:.4f} ({summary['norm_acc']:.3f}x target) -> {args.out}"
    )
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    bundle = _target(args, cfg)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    spec = SweepSpec(axis=args.axis, values=values, repeats=args.repeats, attack=args.attack, base=cfg,
                     first_seed=cfg.attack.seed)
    report = run_sweep(spec, bundle, out_dir=args.out)
    print(report.format_summary())
    print(f"{len(report.rows)} runs -> {os.path.join(args.out, 'report.csv')}")
    return 0


def cmd_eval(args):
    cfg = load_config(args.config)
    bundle = _target(args, cfg)
    clone, _ = load_checkpoint(args.clone)
    ev = bundle.eval_set
    acc = clone_accuracy(clone, ev)
    agree = agreement_rate(clone, bundle.model.predict, ev.x)
    print(json.dumps({
        "clone_acc": acc,
        "target_acc": bundle.test_acc,
        "norm_acc": normalized_accuracy(acc, bundle.test_acc),
        "agreement": agree,
    }, indent=2))
    return 0


def cmd_report(args):
    report = Report.from_csv(args.report)
    print(report.format_summary())
    if args.out:
        write_summary_csv(report, args.out)
    return 0


COMMANDS = {
    "train-target": cmd_train_target,
    "attack": cmd_attack,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, KeyError, ValueError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"mazeattack {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
