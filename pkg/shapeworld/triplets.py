"""
Triplet Sampling
Anchor/positive share a shape but not a texture; the negative has another shape
"""

import logging
import os
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Hashable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import InsufficientVariety

logger = logging.getLogger(__name__)

ImageRef = Union[int, str]


@dataclass(frozen=True)
class Triplet:
    anchor: ImageRef
    positive: ImageRef
    negative: ImageRef

    def as_tuple(self) -> Tuple[ImageRef, ImageRef, ImageRef]:
        return (self.anchor, self.positive, self.negative)


@dataclass(frozen=True)
class LabeledImage:
    ref: Hashable
    shape: str
    texture: str


class TripletSampler:
    """Uniform triplet sampler over one split"""

    def __init__(self, items: Sequence[LabeledImage]):
        self.items = list(items)
        self._by_shape: Dict[str, List[int]] = defaultdict(list)
        textures: Dict[str, set] = defaultdict(set)
        for idx, item in enumerate(self.items):
            self._by_shape[item.shape].append(idx)
            textures[item.shape].add(item.texture)

        if len(self._by_shape) < 2:
            raise InsufficientVariety(f"split has {len(self._by_shape)} shape(s), need at least 2")
        self._anchors = [i for i, item in enumerate(self.items) if len(textures[item.shape]) >= 2]
        if not self._anchors:
            raise InsufficientVariety("no shape in the split appears with two textures")

        self._positives: Dict[Tuple[str, str], List[int]] = {}
        self._negatives: Dict[str, List[int]] = {}
        for shape, members in self._by_shape.items():
            self._negatives[shape] = [i for i, item in enumerate(self.items) if item.shape != shape]
            for texture in textures[shape]:
                self._positives[(shape, texture)] = [i for i in members if self.items[i].texture != texture]

    def sample(self, rng: np.random.Generator) -> Triplet:
        anchor = self.items[self._anchors[rng.integers(len(self._anchors))]]
        positives = self._positives[(anchor.shape, anchor.texture)]
        negatives = self._negatives[anchor.shape]
        positive = self.items[positives[rng.integers(len(positives))]]
        negative = self.items[negatives[rng.integers(len(negatives))]]
        return Triplet(anchor.ref, positive.ref, negative.ref)

    def sample_many(self, rng: np.random.Generator, count: int) -> List[Triplet]:
        return [self.sample(rng) for _ in range(count)]


def sample_triplet(rng: np.random.Generator, split: Sequence[LabeledImage]) -> Triplet:
    """Draw one triplet from a split's labeled images"""
    return TripletSampler(split).sample(rng)


def check_triplet(triplet: Triplet, labels: Dict[ImageRef, Tuple[str, str]]) -> bool:
    a_shape, a_tex = labels[triplet.anchor]
    p_shape, p_tex = labels[triplet.positive]
    n_shape, _ = labels[triplet.negative]
    return a_shape == p_shape and a_tex != p_tex and n_shape != a_shape


def export_triplets_csv(
    triplets: Sequence[Triplet],
    image_paths: Dict[ImageRef, Path],
    path: Union[str, Path],
) -> Path:
    """Write an anchor,positive,negative CSV with paths relative to the CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    rows = [
        [Path(os.path.relpath(Path(image_paths[ref]).resolve(), base)).as_posix() for ref in triplet.as_tuple()]
        for triplet in triplets
    ]
    frame = pd.DataFrame(rows, columns=["anchor", "positive", "negative"])
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"💾 Exported {len(triplets)} triplets to {path}")
    return path
