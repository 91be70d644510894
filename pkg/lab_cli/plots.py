"""
Plots
Deterministic SVG figures for loss curves, trajectories and sweeps
"""

import io
import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from grad_core.serialization import atomic_write_bytes  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no timestamp so reruns give identical SVG bytes
plt.rcParams["svg.hashsalt"] = "steerlab"


def _save_svg(fig, path: Union[str, Path]) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    path = atomic_write_bytes(path, buffer.getvalue())
    logger.debug(f"🎨 figure -> {path}")
    return path


def plot_loss_curves(frame: pd.DataFrame, path: Union[str, Path], title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for column in frame.columns:
        if column == "epoch":
            continue
        ax.plot(frame["epoch"], frame[column], label=column)
    ax.set_xlabel("epoch")
    ax.set_title(title)
    ax.legend()
    return _save_svg(fig, path)


def plot_trajectory(frame: pd.DataFrame, path: Union[str, Path], title: str) -> Path:
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    top.plot(frame["step"], frame["loss"], marker=".", label="guidance loss")
    top.set_ylabel("loss")
    top.set_title(title)
    bottom.fill_between(frame["step"], frame["z_min"], frame["z_max"], alpha=0.3, label="z range")
    bottom.plot(frame["step"], frame["z_mean"], label="z mean")
    bottom.set_xlabel("step")
    bottom.legend()
    return _save_svg(fig, path)


def plot_sweep(aggregate: pd.DataFrame, path: Union[str, Path], parameter: str, title: str) -> Path:
    """Mean final distance with stddev bars; aggregate has value, mean, std columns"""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(aggregate["value"], aggregate["mean"], yerr=aggregate["std"].fillna(0.0), marker="o", capsize=3)
    ax.set_xlabel(parameter)
    ax.set_ylabel("final HPE distance")
    ax.set_title(title)
    return _save_svg(fig, path)


def plot_healing(aggregate: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Grouped bars per paradigm and protocol"""
    fig, ax = plt.subplots(figsize=(7, 4))
    pivot = aggregate.pivot(index="protocol", columns="paradigm", values="mean")
    pivot.plot.bar(ax=ax, rot=0)
    ax.set_ylabel("final HPE distance")
    ax.set_title("guidance stop point")
    return _save_svg(fig, path)
