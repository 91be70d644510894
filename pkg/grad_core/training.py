"""
Training Helpers
Loss curves, minibatch order and progress bars shared by every trainer
"""

import logging
import sys
from typing import Dict, Iterable, Iterator, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

logger = logging.getLogger(__name__)


class LossCurve:
    """Per-epoch metrics, one row per completed epoch"""

    def __init__(self, columns: Iterable[str]):
        self.columns = ["epoch", *columns]
        self.rows: List[Dict[str, float]] = []

    def log(self, epoch: int, **values: float) -> None:
        row = {"epoch": int(epoch)}
        row.update({k: float(values.get(k, float("nan"))) for k in self.columns[1:]})
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def last(self, column: str) -> float:
        return self.rows[-1][column] if self.rows else float("nan")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)


def minibatches(n: int, batch_size: int, rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
    """Index batches over range(n); shuffled when an rng is given"""
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def progress(iterable: Iterable, desc: str, total: Optional[int] = None) -> tqdm:
    return tqdm(iterable, desc=desc, total=total, leave=False, disable=not sys.stderr.isatty())
