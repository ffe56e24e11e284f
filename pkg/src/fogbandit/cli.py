"""Experiment runner CLI.

    fogbandit run --scenario single_stationary --runs 10 --seed 7 --out DIR
    fogbandit compare --scenario single_stationary --policies deb,ducb,blot --out DIR
    fogbandit ne-experiment --out DIR
    fogbandit list-scenarios

Scenario names resolve against the bundled presets first, then as JSON file
paths. FOGBANDIT_OUT and FOGBANDIT_WORKERS override the output directory
and worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .config import POLICY_KINDS, ScenarioConfig, ScenarioError, load_scenario
from .harness import MatrixGameConfig, matrix_game_suite, monte_carlo
from .harness import aggregate
from .output import (write_joint_frequency, write_meta, write_ne_gaps, write_selections,
                     write_summary, write_timeseries)
from .presets import load_preset, preset_names

COMPARE_DEFAULT = ("deb", "exp3", "qpmd", "sdb", "ducb", "blot")


class UsageError(Exception):
    pass


def _resolve_scenario(spec: str) -> ScenarioConfig:
    if spec in preset_names():
        return load_preset(spec)
    if Path(spec).exists():
        return load_scenario(spec)
    raise UsageError(
        f"no preset or file named {spec!r}; presets: {', '.join(preset_names())}")


def _apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    updates = {}
    if getattr(args, "runs", None) is not None:
        updates["runs"] = args.runs
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    if getattr(args, "policy", None) is not None:
        if args.policy not in POLICY_KINDS:
            raise UsageError(
                f"unknown policy {args.policy!r}; valid: {', '.join(POLICY_KINDS)}")
        updates["policy"] = dataclasses.replace(cfg.policy, kind=args.policy)
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg.validate()


def _out_dir(args: argparse.Namespace) -> Path:
    out = args.out or os.environ.get("FOGBANDIT_OUT") or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(args: argparse.Namespace) -> int:
    if getattr(args, "workers", None) is not None:
        return max(1, args.workers)
    env = os.environ.get("FOGBANDIT_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _write_bundle(out: Path, cfg: ScenarioConfig, summaries, extra_files=None,
                  extra_meta=None) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    files = ["timeseries.csv", "summary.csv", "selections.csv"]
    write_timeseries(out / "timeseries.csv", summaries)
    write_summary(out / "summary.csv", {cfg.policy.kind: summaries})
    write_selections(out / "selections.csv", summaries)
    if cfg.task_fns >= 2:
        write_joint_frequency(out / "joint_frequency.csv", summaries)
        files.append("joint_frequency.csv")
    if extra_files:
        files.extend(extra_files)
    meta = {"aggregate": aggregate(summaries),
            "comparator": summaries[0].comparator,
            "hindsight_best": summaries[0].hindsight_best}
    if extra_meta:
        meta.update(extra_meta)
    write_meta(out / "meta.json", cfg, meta, files + ["meta.json"])
    return files


def _mark_partial(out: Path, cfg: ScenarioConfig) -> None:
    present = [p.name for p in sorted(out.glob("*.csv"))]
    try:
        write_meta(out / "meta.json", cfg, {}, present + ["meta.json"], status="partial")
    except OSError:
        pass


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(_resolve_scenario(args.scenario), args)
    out = _out_dir(args)
    try:
        summaries = monte_carlo(cfg, workers=_workers(args))
        _write_bundle(out, cfg, summaries)
    except Exception:
        _mark_partial(out, cfg)
        raise
    agg = aggregate(summaries)
    print(f"{cfg.name}: policy={cfg.policy.kind} runs={agg['runs']} "
          f"final_regret={agg['final_regret_mean']:.6g} "
          f"final_latency={agg['final_latency_mean']:.6g} -> {out}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(_resolve_scenario(args.scenario), args)
    policies = tuple(p.strip() for p in args.policies.split(",") if p.strip())
    for p in policies:
        if p not in POLICY_KINDS:
            raise UsageError(f"unknown policy {p!r}; valid: {', '.join(POLICY_KINDS)}")
    out = _out_dir(args)
    per_policy = {}
    workers = _workers(args)
    try:
        for kind in policies:
            kind_cfg = dataclasses.replace(cfg, policy=dataclasses.replace(cfg.policy, kind=kind))
            summaries = monte_carlo(kind_cfg, workers=workers)
            per_policy[kind] = summaries
            _write_bundle(out / kind, kind_cfg, summaries)
        write_summary(out / "summary.csv", per_policy)
    except Exception:
        _mark_partial(out, cfg)
        raise
    write_meta(out / "meta.json", cfg,
               {"policies": list(policies),
                "aggregate": {k: aggregate(v) for k, v in per_policy.items()}},
               ["summary.csv"] + [f"{k}/timeseries.csv" for k in policies] + ["meta.json"])
    print(f"{cfg.name}: compared {', '.join(policies)} over {cfg.runs} runs -> {out}")
    return 0


def cmd_ne_experiment(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(_resolve_scenario("ne_two_agent"), args)
    out = _out_dir(args)
    workers = _workers(args)
    try:
        summaries = monte_carlo(cfg, workers=workers)
        game_cfg = MatrixGameConfig(horizon=args.game_horizon, runs=args.game_runs,
                                    master_seed=cfg.master_seed + 1)
        results = matrix_game_suite(game_cfg, workers=workers)
        write_ne_gaps(out / "ne_gaps.csv", results)
    except Exception:
        _mark_partial(out, cfg)
        raise
    final_gaps = [max(r.row_gaps[-1], r.col_gaps[-1]) for r in results]
    _write_bundle(out, cfg, summaries, extra_files=["ne_gaps.csv"],
                  extra_meta={"matrix_game": {
                      "matrix": [list(row) for row in game_cfg.matrix],
                      "horizon": game_cfg.horizon,
                      "runs": game_cfg.runs,
                      "feedback_delay": game_cfg.feedback_delay,
                      "mean_final_gap": sum(final_gaps) / len(final_gaps)}})
    print(f"ne_two_agent: {cfg.runs} runs + matching-pennies self-play "
          f"({game_cfg.runs} runs) -> {out}")
    return 0


def cmd_list_scenarios(args: argparse.Namespace) -> int:
    for name in preset_names():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogbandit",
                                     description="Peer-offloading bandit experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--runs", type=int, help="Monte-Carlo run count override")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--horizon", type=int, help="slot-count override")
        p.add_argument("--out", help="output directory (default: runs/ or FOGBANDIT_OUT)")
        p.add_argument("--workers", type=int, help="parallel run workers")

    p_run = sub.add_parser("run", help="run one scenario with one policy")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--policy", help="policy kind override")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several policies on one scenario")
    p_cmp.add_argument("--scenario", required=True)
    p_cmp.add_argument("--policies", default=",".join(COMPARE_DEFAULT))
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_ne = sub.add_parser("ne-experiment",
                          help="two-agent winner-takes-all preset plus matrix-game checks")
    p_ne.add_argument("--game-horizon", type=int, default=30000)
    p_ne.add_argument("--game-runs", type=int, default=20)
    common(p_ne)
    p_ne.set_defaults(func=cmd_ne_experiment)

    p_ls = sub.add_parser("list-scenarios", help="list bundled presets")
    p_ls.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: flag partial output
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
