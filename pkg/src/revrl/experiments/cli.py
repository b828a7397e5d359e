"""Command-line entry points: run a config, reproduce a named recipe, or
verify the tabular theory on random instances."""

from __future__ import annotations

import argparse
import sys

from ..core import RngState
from .. import oracle as O
from ..envs import random_mdp
from .config import ExperimentConfig
from .reproduce import TARGETS, reproduce
from .runner import run


def cmd_run(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.validate()
    result = run(cfg)
    print(f"run {cfg.name}: {len(result.seed_results)} seed(s)")
    for key, value in result.summary.items():
        print(f"  {key}: {value}")
    return 0


def cmd_reproduce(args: argparse.Namespace) -> int:
    report = reproduce(args.target, out_dir=args.out, seeds=args.seeds, fast=args.fast)
    print(report.summary())
    return 0 if report.passed else 1


def cmd_verify_theory(args: argparse.Namespace) -> int:
    rng = RngState(args.seed)
    failures = 0
    for i in range(args.instances):
        n_s = int(rng.fork(f"ns{i}").gen.integers(2, 9))
        n_a = int(rng.fork(f"na{i}").gen.integers(2, 5))
        mdp = random_mdp(n_s, n_a, rng.fork(f"m{i}"))
        pi = O.eps_mixed_policy(mdp, rng.fork(f"p{i}"))
        report = O.verify_theory(mdp, pi, tol=args.tol, label=f"instance-{i}")
        print(report.summary())
        failures += 0 if report.passed else 1
    cycle, _ = O.cycle_counterexample()
    print(cycle.summary())
    failures += 0 if cycle.passed else 1
    print(f"{args.instances} instances verified, {failures} failures")
    return 0 if failures == 0 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="revrl",
        description="reversibility-aware reinforcement learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("--config", required=True, help="path to a config file")
    p_run.add_argument("--seed", type=int, default=None, help="override to one seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("reproduce", help="run a named reproduction recipe")
    p_rep.add_argument("target", choices=TARGETS)
    p_rep.add_argument("--seeds", type=int, default=None, help="number of seeds")
    p_rep.add_argument("--out", default="runs", help="output directory")
    p_rep.add_argument("--fast", action="store_true",
                       help="smoke-test budgets (reference checks may fail)")
    p_rep.set_defaults(func=cmd_reproduce)

    p_ver = sub.add_parser("verify-theory", help="check the exact-oracle bounds")
    p_ver.add_argument("--instances", type=int, default=50)
    p_ver.add_argument("--tol", type=float, default=1e-9)
    p_ver.add_argument("--seed", type=int, default=2024)
    p_ver.set_defaults(func=cmd_verify_theory)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
