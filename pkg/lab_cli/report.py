"""
Report Builder
Aggregates steering summaries, sweeps and healing tables from run directories
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from grad_core.errors import ConfigError

from .artifacts import read_csv_frame, write_csv_frame, write_text
from .plots import plot_healing, plot_sweep

logger = logging.getLogger(__name__)

FRIED_SATURATION = 0.5
STEER_TABLE_COLUMNS = ["run", "paradigm", "seed", "alpha", "schedule", "final_hpe_distance", "control_hpe_distance", "gain"]


class ReportBundle(BaseModel):
    markdown: str
    steer_runs: List[Dict[str, Any]] = Field(default_factory=list)
    sweep_aggregates: List[Dict[str, Any]] = Field(default_factory=list)
    healing_aggregates: List[Dict[str, Any]] = Field(default_factory=list)
    verdicts: Dict[str, Any] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)


def aggregate_sweep(frame: pd.DataFrame) -> pd.DataFrame:
    """Per swept value: mean/std/count of final distance, mean gain and saturation"""
    grouped = frame.groupby("value", sort=True)
    aggregate = pd.DataFrame({
        "mean": grouped["final_hpe_distance"].mean(),
        "std": grouped["final_hpe_distance"].std(),
        "n": grouped["final_hpe_distance"].count(),
        "gain": grouped["gain"].mean(),
        "saturation": grouped["saturation"].mean(),
    }).reset_index()
    return aggregate


def sweep_outcomes(aggregate: pd.DataFrame) -> List[str]:
    """unguided / under-steered / optimal / over-steered / fried per swept value"""
    values = aggregate["value"].to_numpy()
    means = aggregate["mean"].to_numpy()
    saturation = aggregate["saturation"].to_numpy()
    fried = [bool(np.isnan(m) or (not np.isnan(s) and s >= FRIED_SATURATION)) for m, s in zip(means, saturation)]
    candidates = [i for i, v in enumerate(values) if v != 0 and not fried[i]]
    best = min(candidates, key=lambda i: means[i]) if candidates else None
    labels = []
    for i, value in enumerate(values):
        if value == 0:
            labels.append("unguided")
        elif fried[i]:
            labels.append("fried")
        elif i == best:
            labels.append("optimal")
        elif best is not None and value > values[best]:
            labels.append("over-steered")
        else:
            labels.append("under-steered")
    return labels


def aggregate_healing(frame: pd.DataFrame) -> pd.DataFrame:
    grouped = frame.groupby(["paradigm", "protocol"], sort=True)["final_hpe_distance"]
    return pd.DataFrame({"mean": grouped.mean(), "std": grouped.std(), "n": grouped.count()}).reset_index()


def _protocol_mean(aggregate: pd.DataFrame, paradigm: str, protocol: str) -> float:
    hit = aggregate[(aggregate["paradigm"] == paradigm) & (aggregate["protocol"] == protocol)]
    return float(hit["mean"].iloc[0]) if len(hit) else math.nan


def healing_verdicts(frame: pd.DataFrame, num_steps: int, stop_fractions: Dict[str, float]) -> Dict[str, Any]:
    """Gap between early-stopped and continuous guidance per paradigm.

    A positive flow gap means the flow sampler drifted back after guidance stopped.
    DDIM counts as locked in when its gap is smaller than the flow gap.
    """
    aggregate = aggregate_healing(frame)
    verdicts: Dict[str, Any] = {}
    for paradigm, fraction in stop_fractions.items():
        k = int(round(fraction * num_steps))
        gap = _protocol_mean(aggregate, paradigm, f"stop_after:{k}") - _protocol_mean(aggregate, paradigm, "continuous")
        full = frame[frame["paradigm"] == paradigm].pivot_table(
            index="seed", columns="protocol", values="final_hpe_distance", aggfunc="first"
        )
        full_label, early_label = f"stop_after:{num_steps}", f"stop_after:{k}"
        matches = None
        if full_label in full and "continuous" in full:
            matches = bool(np.array_equal(full[full_label].to_numpy(), full["continuous"].to_numpy(), equal_nan=True))
        healed = 0
        if early_label in full and "continuous" in full:
            healed = int((full[early_label] > full["continuous"]).sum())
        verdicts[paradigm] = {
            "stop_after": k,
            "gap": gap,
            "healed_seeds": healed,
            "seeds": int(len(full)),
            "full_schedule_matches_continuous": matches,
        }
    flow, ddim = verdicts.get("flow"), verdicts.get("ddim")
    if flow is not None:
        flow["heals"] = bool(flow["gap"] > 0)
    if flow is not None and ddim is not None:
        ddim["locked_in"] = bool(abs(ddim["gap"]) < flow["gap"])
    return verdicts


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.4f}"
    return str(value)


def markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    rows = ["| " + " | ".join(_fmt(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *rows])


def _read_summary(path: Path) -> Dict[str, Any]:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigError(f"malformed run summary {path}: {e}") from e


def _steer_row(run: str, summary: Dict[str, Any]) -> Dict[str, Any]:
    try:
        guidance = summary["guidance"]
        return {
            "run": run,
            "paradigm": summary["paradigm"],
            "seed": summary["seed"],
            "alpha": guidance["alpha"],
            "schedule": guidance["schedule"]["kind"],
            "final_hpe_distance": summary["final_hpe_distance"],
            "control_hpe_distance": summary.get("control_hpe_distance", math.nan),
            "gain": summary.get("gain", math.nan),
        }
    except (KeyError, TypeError) as e:
        raise ConfigError(f"run summary in {run} is missing {e}") from e


def _require_columns(frame: pd.DataFrame, columns: Sequence[str], path: Path) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"{path} lacks columns {missing}")


def build_report(
    run_dirs: Sequence[Union[str, Path]],
    output_dir: Union[str, Path],
    num_steps: int = 50,
    stop_fractions: Optional[Dict[str, float]] = None,
) -> ReportBundle:
    """Reads every recognizable artifact under run_dirs and writes report.md plus tables and SVGs"""
    if not run_dirs:
        raise ConfigError("report needs at least one run directory")
    stop_fractions = stop_fractions or {"flow": 0.2, "ddim": 0.6}
    output_dir = Path(output_dir)
    steer_rows: List[Dict[str, Any]] = []
    sweep_frames: List[pd.DataFrame] = []
    healing_frames: List[pd.DataFrame] = []
    files: List[str] = []

    for run_dir in map(Path, run_dirs):
        if not run_dir.is_dir():
            raise ConfigError(f"run directory not found: {run_dir}")
        found = 0
        for summary_path in sorted(run_dir.glob("steer/*/seed-*/summary.json")):
            steer_rows.append(_steer_row(run_dir.name, _read_summary(summary_path)))
            found += 1
        for sweep_path in sorted(run_dir.glob("sweeps/*/sweep_detail.csv")):
            frame = read_csv_frame(sweep_path)
            _require_columns(frame, ["value", "seed", "final_hpe_distance", "gain", "saturation"], sweep_path)
            aggregate = aggregate_sweep(frame)
            aggregate["outcome"] = sweep_outcomes(aggregate)
            aggregate.insert(0, "sweep", sweep_path.parent.name)
            aggregate.insert(0, "run", run_dir.name)
            sweep_frames.append(aggregate)
            found += 1
        healing_path = run_dir / "healing" / "healing.csv"
        if healing_path.exists():
            frame = read_csv_frame(healing_path)
            _require_columns(frame, ["paradigm", "protocol", "seed", "final_hpe_distance"], healing_path)
            frame.insert(0, "run", run_dir.name)
            healing_frames.append(frame)
            found += 1
        if not found:
            raise ConfigError(f"no steering, sweep or healing results under {run_dir}")

    sections = ["# Steering report", ""]
    bundle = ReportBundle(markdown="")

    if steer_rows:
        steer_frame = pd.DataFrame(steer_rows, columns=STEER_TABLE_COLUMNS)
        files.append(str(write_csv_frame(output_dir / "steer_runs.csv", steer_frame)))
        sections += ["## Steering runs", "", markdown_table(steer_frame), ""]
        bundle.steer_runs = steer_frame.to_dict(orient="records")

    if sweep_frames:
        sweeps = pd.concat(sweep_frames, ignore_index=True)
        files.append(str(write_csv_frame(output_dir / "sweep_aggregate.csv", sweeps)))
        sections += ["## Sweeps", "", markdown_table(sweeps), ""]
        for (run, sweep), group in sweeps.groupby(["run", "sweep"], sort=True):
            parameter = sweep.split("-", 1)[-1]
            svg = plot_sweep(group, output_dir / f"{run}-{sweep}.svg", parameter, f"{run} {sweep}")
            files.append(str(svg))
        bundle.sweep_aggregates = sweeps.to_dict(orient="records")

    if healing_frames:
        healing = pd.concat(healing_frames, ignore_index=True)
        aggregate = aggregate_healing(healing)
        verdicts = healing_verdicts(healing, num_steps, stop_fractions)
        files.append(str(write_csv_frame(output_dir / "healing_aggregate.csv", aggregate)))
        files.append(str(plot_healing(aggregate, output_dir / "healing.svg")))
        sections += ["## Guidance stop point", "", markdown_table(aggregate), ""]
        for paradigm, verdict in verdicts.items():
            sections.append(f"- {paradigm}: " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(verdict.items())))
        sections.append("")
        bundle.healing_aggregates = aggregate.to_dict(orient="records")
        bundle.verdicts = verdicts

    bundle.markdown = "\n".join(sections)
    files.append(str(write_text(output_dir / "report.md", bundle.markdown)))
    bundle.files = files
    logger.info(f"✅ Report over {len(run_dirs)} run(s) written to {output_dir}")
    return bundle
