"""
Run Layout
Where every artifact of a run directory lives, plus atomic JSON and CSV writers
"""

import json
import logging
from pathlib import Path
from typing import Any, Union

import pandas as pd

from grad_core.errors import MissingArtifact
from grad_core.serialization import atomic_write_bytes

logger = logging.getLogger(__name__)

CHECKPOINTS = ("teacher", "baseline", "denoiser", "velocity", "decoder")


class RunLayout:
    """Paths under one output directory"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def checkpoint_dir(self) -> Path:
        return self.root / "checkpoints"

    def checkpoint(self, name: str) -> Path:
        if name not in CHECKPOINTS:
            raise KeyError(name)
        return self.checkpoint_dir / f"{name}.ckpt"

    @property
    def curves_dir(self) -> Path:
        return self.root / "curves"

    def curve(self, name: str) -> Path:
        return self.curves_dir / f"{name}_loss.csv"

    def eval_report(self, name: str) -> Path:
        return self.root / "eval" / f"{name}_eval.json"

    def steer_dir(self, paradigm: str, seed: int) -> Path:
        return self.root / "steer" / paradigm / f"seed-{seed}"

    def sweep_dir(self, paradigm: str, parameter: str) -> Path:
        return self.root / "sweeps" / f"{paradigm}-{parameter}"

    @property
    def healing_dir(self) -> Path:
        return self.root / "healing"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    def require(self, path: Path, what: str) -> Path:
        if not path.exists():
            raise MissingArtifact(f"{what} not found: {path}")
        return path


def write_json(path: Union[str, Path], payload: Any) -> Path:
    """Sorted keys so identical runs produce identical bytes"""
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_text(path: Union[str, Path], text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_csv_frame(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    """Header row, shortest round-trip float repr, empty cells for NaN"""
    text = frame.to_csv(index=False, lineterminator="\n")
    path = atomic_write_bytes(path, text.encode("utf-8"))
    logger.debug(f"💾 {len(frame)} rows -> {path}")
    return path


def read_csv_frame(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"table not found: {path}")
    return pd.read_csv(path, float_precision="round_trip")
