"""Render figures from fogbandit CSV run bundles.

Five figure kinds, all reading the versioned bundle schema and nothing else:

    regret        mean cumulative regret over runs, one curve per bundle
    latency       mean windowed latency over runs, one curve per bundle
    selections    per-arm selection histogram (bars sum to total decisions)
    joint_heatmap joint selection frequency of agents 0/1, one panel per window
    ne_gap        epsilon-NE gap decay of the matrix-game self-play

Rendering never touches the inputs and is byte-stable: rendering the same
spec twice produces identical image files.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGURE_KINDS = ("regret", "latency", "selections", "joint_heatmap", "ne_gap")
WINDOW_ORDER = ("first_third", "middle_third", "final_third", "full")

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "fogbandit-plots"}}


class RenderError(Exception):
    """Bad spec, missing file, schema mismatch or empty input."""


@dataclass(frozen=True)
class FigureSpec:
    bundles: tuple[Path, ...]
    kind: str
    out: Path
    title: str | None = None

    def validate(self) -> "FigureSpec":
        if self.kind not in FIGURE_KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; valid: {FIGURE_KINDS}")
        if not self.bundles:
            raise RenderError("at least one bundle path is required")
        for b in self.bundles:
            if not Path(b).is_dir():
                raise RenderError(f"bundle directory not found: {b}")
        return self


@dataclass
class RenderResult:
    """What was drawn, for downstream checks: labeled arrays plus the image path."""

    kind: str
    out: Path
    data: dict[str, Any] = field(default_factory=dict)


def _read_rows(path: Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    if not path.is_file():
        raise RenderError(f"missing input file: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise RenderError(f"{path.name} is missing column '{col}'")
        rows = list(reader)
    if not rows:
        raise RenderError(f"empty input: {path}")
    return rows


def _bundle_label(bundle: Path) -> str:
    summary = bundle / "summary.csv"
    if summary.is_file():
        rows = _read_rows(summary, ("policy",))
        names = sorted({r["policy"] for r in rows})
        if names:
            return ",".join(names)
    meta = bundle / "meta.json"
    if meta.is_file():
        doc = json.loads(meta.read_text())
        return doc.get("scenario", {}).get("name", bundle.name)
    return bundle.name


def _mean_series(bundle: Path, column: str) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_rows(bundle / "timeseries.csv",
                      ("run", "slot", "agent", "arm", "loss", "cum_regret",
                       "window_latency"))
    acc: dict[int, list[float]] = defaultdict(list)
    for r in rows:
        acc[int(r["slot"])].append(float(r[column]))
    slots = np.array(sorted(acc))
    values = np.array([np.mean(acc[s]) for s in slots])
    return slots, values


def _render_series(spec: FigureSpec, column: str, ylabel: str) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    result = RenderResult(spec.kind, spec.out)
    for bundle in spec.bundles:
        slots, values = _mean_series(Path(bundle), column)
        label = _bundle_label(Path(bundle))
        ax.plot(slots, values, label=label)
        result.data[label] = (slots, values)
    ax.set_xlabel("slot")
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.set_title(spec.title or spec.kind)
    fig.tight_layout()
    fig.savefig(spec.out, **_SAVE_KWARGS)
    plt.close(fig)
    return result


def _render_selections(spec: FigureSpec) -> RenderResult:
    bundle = Path(spec.bundles[0])
    rows = _read_rows(bundle / "selections.csv",
                      ("run", "agent", "arm", "count", "final_third_count"))
    counts: dict[int, int] = defaultdict(int)
    for r in rows:
        counts[int(r["arm"])] += int(r["count"])
    arms = np.array(sorted(counts))
    totals = np.array([counts[a] for a in arms])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(arms, totals)
    ax.set_xlabel("service FN (arm)")
    ax.set_ylabel("selections")
    ax.set_xticks(arms)
    ax.set_title(spec.title or f"selections ({_bundle_label(bundle)})")
    fig.tight_layout()
    fig.savefig(spec.out, **_SAVE_KWARGS)
    plt.close(fig)
    return RenderResult(spec.kind, spec.out, {"arms": arms, "counts": totals})


def load_joint_windows(bundle: Path) -> dict[str, np.ndarray]:
    rows = _read_rows(bundle / "joint_frequency.csv",
                      ("window", "window_start", "window_end", "agent_a", "agent_b",
                       "arm_a", "arm_b", "freq"))
    n_arms = max(int(r["arm_a"]) for r in rows) + 1
    mats: dict[str, np.ndarray] = {}
    for r in rows:
        mat = mats.setdefault(r["window"], np.zeros((n_arms, n_arms)))
        mat[int(r["arm_a"]), int(r["arm_b"])] = float(r["freq"])
    return mats


def _render_joint_heatmap(spec: FigureSpec) -> RenderResult:
    bundle = Path(spec.bundles[0])
    mats = load_joint_windows(bundle)
    windows = [w for w in WINDOW_ORDER if w in mats] or sorted(mats)
    fig, axes = plt.subplots(1, len(windows), figsize=(3.2 * len(windows), 3.4))
    if len(windows) == 1:
        axes = [axes]
    vmax = max(float(m.max()) for m in mats.values())
    for ax, window in zip(axes, windows):
        im = ax.imshow(mats[window], vmin=0.0, vmax=vmax, origin="lower",
                       cmap="viridis")
        ax.set_title(window)
        ax.set_xlabel("agent 1 arm")
        ax.set_ylabel("agent 0 arm")
    fig.colorbar(im, ax=list(axes), shrink=0.8)
    fig.suptitle(spec.title or f"joint selections ({_bundle_label(bundle)})")
    fig.savefig(spec.out, **_SAVE_KWARGS)
    plt.close(fig)
    return RenderResult(spec.kind, spec.out, dict(mats))


def _render_ne_gap(spec: FigureSpec) -> RenderResult:
    bundle = Path(spec.bundles[0])
    rows = _read_rows(bundle / "ne_gaps.csv", ("run", "checkpoint", "row_gap", "col_gap"))
    acc: dict[int, list[tuple[float, float]]] = defaultdict(list)
    for r in rows:
        acc[int(r["checkpoint"])].append((float(r["row_gap"]), float(r["col_gap"])))
    ckpts = np.array(sorted(acc))
    row_means = np.array([np.mean([g[0] for g in acc[c]]) for c in ckpts])
    col_means = np.array([np.mean([g[1] for g in acc[c]]) for c in ckpts])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(ckpts, row_means, marker="o", label="row player gap")
    ax.plot(ckpts, col_means, marker="s", label="column player gap")
    ax.set_xlabel("slot")
    ax.set_ylabel("epsilon-NE gap of ergodic averages")
    ax.legend()
    ax.set_title(spec.title or "equilibrium gap decay")
    fig.tight_layout()
    fig.savefig(spec.out, **_SAVE_KWARGS)
    plt.close(fig)
    return RenderResult(spec.kind, spec.out,
                        {"checkpoints": ckpts, "row": row_means, "col": col_means})


def render(spec: FigureSpec) -> RenderResult:
    """Write the figure for `spec`; returns the plotted data for inspection."""
    spec.validate()
    Path(spec.out).parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "regret":
        return _render_series(spec, "cum_regret", "mean cumulative regret")
    if spec.kind == "latency":
        return _render_series(spec, "window_latency", "windowed mean latency (slots)")
    if spec.kind == "selections":
        return _render_selections(spec)
    if spec.kind == "joint_heatmap":
        return _render_joint_heatmap(spec)
    return _render_ne_gap(spec)
