"""Command-line entry point.

Subcommands: gen-data, stage1, cluster, stage2, pipeline, toy, ablate, eval.
Exit codes: 0 success, 2 configuration error, 3 runtime numeric error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import RunConfig, load_config, validate_config
from .errors import ConfigError, DomainError, NumericError
from . import pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--seed", type=int, help="global seed override")
    p.add_argument("--out", help="output directory override")
    p.add_argument("--tau-schedule", help="comma list of gate thresholds, one iteration each")
    p.add_argument("--no-lgl", action="store_true", help="disable gating (forces epochs_gated = 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("gen-data", "generate the synthetic corpus and trial list"),
        ("stage1", "contrastive pretraining"),
        ("cluster", "embed and cluster once (plus optional elbow scan)"),
        ("stage2", "iterative pseudo-label training with the loss gate"),
        ("pipeline", "gen-data + stage1 + stage2 + scoring"),
        ("toy", "label-noise loss-curve experiment"),
        ("ablate", "single-iteration sweep over tau or cluster count"),
        ("eval", "score trials with a stored encoder"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "ablate":
            p.add_argument("--axis", choices=["tau", "k"], default="tau")
        if name == "eval":
            p.add_argument("--checkpoint", help="encoder checkpoint path (default: out dir)")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.tau_schedule:
        try:
            taus = tuple(float(v) for v in args.tau_schedule.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"bad --tau-schedule: {exc}") from exc
        cfg = replace(cfg, stage2=replace(cfg.stage2, taus=taus))
    if args.no_lgl:
        cfg = replace(cfg, stage2=replace(cfg.stage2, epochs_gated=0))
    return validate_config(cfg)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "gen-data":
            pipeline.gen_data(cfg)
        elif args.command == "stage1":
            pipeline.stage1(cfg)
        elif args.command == "cluster":
            pipeline.cluster_once(cfg)
        elif args.command == "stage2":
            pipeline.stage2(cfg)
        elif args.command == "pipeline":
            pipeline.run_pipeline(cfg)
        elif args.command == "toy":
            result = pipeline.run_toy(cfg)
            print(f"reliable={result['stats']['num_reliable']} unreliable={result['stats']['num_unreliable']} "
                  f"final_gap={result['stats']['final_gap']}")
        elif args.command == "ablate":
            pipeline.run_ablation(cfg, args.axis)
        elif args.command == "eval":
            summary = pipeline.run_eval(cfg, checkpoint=args.checkpoint)
            print(f"EER {100 * summary['eer']:.2f}% at threshold {summary['threshold']:.4f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
