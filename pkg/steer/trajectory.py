"""
Steering Records
Per-step trajectory samples and the result of one steering run
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import GuidanceConfig

TRAJECTORY_COLUMNS = ["step", "loss", "grad_norm", "z_min", "z_max", "z_mean", "applied"]


@dataclass
class TrajectorySample:
    step: int
    loss: float = math.nan
    grad_norm: float = math.nan
    z_min: float = math.nan
    z_max: float = math.nan
    z_mean: float = math.nan
    applied: bool = False
    # norm of the latent displacement caused by guidance alone (alpha or alpha*dt)
    update_norm: float = 0.0

    def record_latent(self, z: np.ndarray) -> None:
        self.z_min = float(np.min(z))
        self.z_max = float(np.max(z))
        self.z_mean = float(np.mean(z))


def trajectory_frame(trajectory: List[TrajectorySample]) -> pd.DataFrame:
    rows = [{c: getattr(s, c) for c in TRAJECTORY_COLUMNS} for s in trajectory]
    frame = pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
    frame["applied"] = frame["applied"].astype(bool)
    return frame


@dataclass
class SteerResult:
    paradigm: str
    seed: int
    config: GuidanceConfig
    final_latent: np.ndarray = field(repr=False)
    final_image: np.ndarray = field(repr=False)
    final_hpe_distance: float
    trajectory: List[TrajectorySample]
    saturation: float = 0.0
    target_ref: Optional[str] = None

    @property
    def guided_steps(self) -> int:
        return sum(1 for s in self.trajectory if s.applied)

    def to_frame(self) -> pd.DataFrame:
        return trajectory_frame(self.trajectory)

    def summary(self) -> Dict[str, Any]:
        return {
            "paradigm": self.paradigm,
            "seed": self.seed,
            "guidance": self.config.model_dump(mode="json"),
            "final_hpe_distance": self.final_hpe_distance,
            "guided_steps": self.guided_steps,
            "saturation": self.saturation,
            "target": self.target_ref,
        }
