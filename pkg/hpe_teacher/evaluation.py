"""
Teacher Evaluation
Odd-one-out accuracy, HPE distance and embedding cluster statistics
"""

import json
import logging
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel
from sklearn.metrics import pairwise_distances

from grad_core.errors import ConfigError
from grad_core.tensor import no_tape
from shapeworld.triplets import Triplet

from .embedding_net import EmbeddingNet, ImageLike

logger = logging.getLogger(__name__)


class EmptyTripletSet(ConfigError):
    """Evaluation was asked for an empty triplet list"""


class EvalReport(BaseModel):
    accuracy: float
    n_triplets: int
    mean_d_ap: float
    mean_d_an: float
    pair_accuracy: Dict[str, Dict[str, float]] = {}

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


class ClusterStats(BaseModel):
    """Mean squared embedding distance over image pairs grouped by shared label"""

    same_shape: float
    same_texture: float
    different_shape: float


def odd_one_out_correct(d_ap: np.ndarray, d_an: np.ndarray, d_pn: np.ndarray) -> np.ndarray:
    """The negative is the odd one out iff A-P is strictly the closest pair; ties count wrong"""
    return (np.asarray(d_an) > np.asarray(d_ap)) & (np.asarray(d_pn) > np.asarray(d_ap))


def odd_one_out_from_embeddings(a: np.ndarray, p: np.ndarray, n: np.ndarray) -> np.ndarray:
    a, p, n = (np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in (a, p, n))
    d_ap = np.linalg.norm(a - p, axis=1)
    d_an = np.linalg.norm(a - n, axis=1)
    d_pn = np.linalg.norm(p - n, axis=1)
    return odd_one_out_correct(d_ap, d_an, d_pn)


def _embed_refs(net: EmbeddingNet, triplets: Sequence[Triplet], images: Mapping[Hashable, np.ndarray]):
    refs = sorted({ref for t in triplets for ref in t.as_tuple()}, key=str)
    vectors = net.embed_batch(np.stack([np.asarray(images[r]).reshape(-1) for r in refs]))
    lookup = {ref: i for i, ref in enumerate(refs)}
    rows = np.array([[lookup[r] for r in t.as_tuple()] for t in triplets])
    return vectors[rows[:, 0]], vectors[rows[:, 1]], vectors[rows[:, 2]]


def odd_one_out_accuracy(
    net: EmbeddingNet,
    triplets: Sequence[Triplet],
    images: Mapping[Hashable, np.ndarray],
) -> float:
    """Fraction of triplets whose negative the net singles out"""
    if not triplets:
        raise EmptyTripletSet("odd-one-out accuracy needs at least one triplet")
    a, p, n = _embed_refs(net, triplets, images)
    return float(np.mean(odd_one_out_from_embeddings(a, p, n)))


def evaluate_triplets(
    net: EmbeddingNet,
    triplets: Sequence[Triplet],
    images: Mapping[Hashable, np.ndarray],
    labels: Optional[Mapping[Hashable, Tuple[str, str]]] = None,
) -> EvalReport:
    """Accuracy, mean distances and (with labels) an anchor-shape x negative-shape accuracy matrix"""
    if not triplets:
        raise EmptyTripletSet("evaluation needs at least one triplet")
    a, p, n = _embed_refs(net, triplets, images)
    correct = odd_one_out_from_embeddings(a, p, n)
    report = EvalReport(
        accuracy=float(np.mean(correct)),
        n_triplets=len(triplets),
        mean_d_ap=float(np.mean(np.linalg.norm(a - p, axis=1))),
        mean_d_an=float(np.mean(np.linalg.norm(a - n, axis=1))),
    )
    if labels is not None:
        frame = pd.DataFrame({
            "anchor_shape": [labels[t.anchor][0] for t in triplets],
            "negative_shape": [labels[t.negative][0] for t in triplets],
            "correct": correct.astype(float),
        })
        matrix = frame.pivot_table(index="anchor_shape", columns="negative_shape", values="correct", aggfunc="mean")
        report.pair_accuracy = {
            anchor: {neg: float(v) for neg, v in row.items() if not np.isnan(v)}
            for anchor, row in matrix.to_dict(orient="index").items()
        }
    return report


def hpe_distance_embeddings(u: np.ndarray, v: np.ndarray) -> float:
    diff = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    return float(np.dot(diff.reshape(-1), diff.reshape(-1)))


def hpe_distance(net: EmbeddingNet, image_a: ImageLike, image_b: ImageLike) -> float:
    """Squared Euclidean distance between the two unit embeddings, in [0, 4]"""
    with no_tape():
        u = net.embed_tensor(image_a).numpy()
        v = net.embed_tensor(image_b).numpy()
    return hpe_distance_embeddings(u, v)


def cluster_distances(
    net: EmbeddingNet,
    images: Mapping[Hashable, np.ndarray],
    labels: Mapping[Hashable, Tuple[str, str]],
) -> ClusterStats:
    refs = sorted(images, key=str)
    vectors = net.embed_batch(np.stack([np.asarray(images[r]).reshape(-1) for r in refs]))
    distances = pairwise_distances(vectors, metric="sqeuclidean")
    shapes = np.array([labels[r][0] for r in refs])
    textures = np.array([labels[r][1] for r in refs])

    upper = np.triu(np.ones_like(distances, dtype=bool), k=1)
    same_shape = (shapes[:, None] == shapes[None, :]) & upper
    same_texture = (textures[:, None] == textures[None, :]) & upper

    def masked_mean(mask: np.ndarray) -> float:
        return float(distances[mask].mean()) if mask.any() else float("nan")

    return ClusterStats(
        same_shape=masked_mean(same_shape & ~same_texture),
        same_texture=masked_mean(same_texture & ~same_shape),
        different_shape=masked_mean(~same_shape & upper),
    )


def chance_triplets(refs: Sequence[Hashable], count: int, rng: np.random.Generator) -> List[Triplet]:
    """Three distinct images drawn uniformly; any label-blind net scores 1/3 in expectation"""
    refs = list(refs)
    picks = [rng.choice(len(refs), size=3, replace=False) for _ in range(count)]
    return [Triplet(refs[i], refs[j], refs[k]) for i, j, k in picks]

