"""Bit-stable CSV/metadata writers for run bundles.

Schemas (version 1):
  timeseries.csv      run,slot,agent,arm,loss,cum_regret,window_latency
  summary.csv         policy,runs,final_regret_mean,final_regret_se,final_latency_mean,best_arm_frequency
  selections.csv      run,agent,arm,count,final_third_count
  joint_frequency.csv window,window_start,window_end,agent_a,agent_b,arm_a,arm_b,freq
  ne_gaps.csv         run,checkpoint,row_gap,col_gap
  meta.json           resolved config, master seed, schema version, file list

Numbers are formatted with 9 significant digits, LF line endings, no locale
dependence; identical inputs give byte-identical bundles.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

from .config import ScenarioConfig, scenario_to_dict
from .harness import MatrixGameResult, RunSummary, aggregate

SCHEMA_VERSION = 1
TIMESERIES_COLUMNS = ("run", "slot", "agent", "arm", "loss", "cum_regret", "window_latency")
SUMMARY_COLUMNS = ("policy", "runs", "final_regret_mean", "final_regret_se",
                   "final_latency_mean", "best_arm_frequency")
SELECTIONS_COLUMNS = ("run", "agent", "arm", "count", "final_third_count")
JOINT_COLUMNS = ("window", "window_start", "window_end", "agent_a", "agent_b",
                 "arm_a", "arm_b", "freq")
NE_GAP_COLUMNS = ("run", "checkpoint", "row_gap", "col_gap")


def fmt(x: Any) -> str:
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def _write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_timeseries(path: Path, summaries: list[RunSummary]) -> None:
    def rows():
        for s in summaries:
            n_agents = s.arms.shape[1]
            for k, slot in enumerate(s.slots):
                for v in range(n_agents):
                    yield (s.run_index, int(slot), v, int(s.arms[k, v]),
                           float(s.loss[k, v]), float(s.cum_regret[k, v]),
                           float(s.window_latency[k, v]))

    _write_csv(path, TIMESERIES_COLUMNS, rows())


def write_selections(path: Path, summaries: list[RunSummary]) -> None:
    def rows():
        for s in summaries:
            n_agents, n_arms = s.selection_counts.shape
            for v in range(n_agents):
                for j in range(n_arms):
                    yield (s.run_index, v, j, int(s.selection_counts[v, j]),
                           int(s.final_third_counts[v, j]))

    _write_csv(path, SELECTIONS_COLUMNS, rows())


def write_summary(path: Path, per_policy: dict[str, list[RunSummary]]) -> None:
    def rows():
        for policy in sorted(per_policy):
            agg = aggregate(per_policy[policy])
            yield (policy, agg["runs"], agg["final_regret_mean"], agg["final_regret_se"],
                   agg["final_latency_mean"], agg["best_arm_frequency"])

    _write_csv(path, SUMMARY_COLUMNS, rows())


def write_joint_frequency(path: Path, summaries: list[RunSummary]) -> None:
    """Across-run mean joint selection frequency of agents (0,1) per window."""
    ordered = ("first_third", "middle_third", "final_third", "full")

    def rows():
        base = summaries[0]
        n_arms = base.joint_windows[ordered[0]].shape[0]
        for label in ordered:
            mats = [s.joint_windows[label] for s in summaries]
            mean = sum(mats) / len(mats)
            start, end = base.window_bounds[label]
            for a in range(n_arms):
                for b in range(n_arms):
                    yield (label, start + 1, end, 0, 1, a, b, float(mean[a, b]))

    _write_csv(path, JOINT_COLUMNS, rows())


def write_ne_gaps(path: Path, results: list[MatrixGameResult]) -> None:
    def rows():
        for r in results:
            for ckpt, rg, cg in zip(r.checkpoints, r.row_gaps, r.col_gaps):
                yield (r.run_index, ckpt, float(rg), float(cg))

    _write_csv(path, NE_GAP_COLUMNS, rows())


def write_meta(path: Path, cfg: ScenarioConfig, extra: dict[str, Any],
               files: list[str], status: str = "ok") -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "status": status,
        "scenario": scenario_to_dict(cfg),
        "master_seed": cfg.master_seed,
        "files": files,
        **extra,
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
