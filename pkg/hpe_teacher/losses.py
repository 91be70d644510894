"""
Teacher Losses
Triplet margin loss and texture-classifier cross-entropy
"""

from typing import Union

import numpy as np

from grad_core import ops
from grad_core.tensor import Tensor

TensorLike = Union[Tensor, np.ndarray]


def triplet_loss(a: TensorLike, p: TensorLike, n: TensorLike, margin: float = 0.2) -> Tensor:
    """max(0, d(a,p) - d(a,n) + margin) with Euclidean d; batched rows are averaged"""
    d_ap = ops.l2norm(ops.sub(a, p), axis=-1)
    d_an = ops.l2norm(ops.sub(a, n), axis=-1)
    hinge = ops.relu(ops.add(ops.sub(d_ap, d_an), margin))
    return ops.mean(hinge) if hinge.ndim else hinge


def cross_entropy(logits: TensorLike, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)"""
    logits = ops.lift(logits)
    one_hot = np.zeros(logits.shape)
    one_hot[np.arange(len(labels)), np.asarray(labels, dtype=int)] = 1.0
    log_probs = ops.log_softmax(logits, axis=-1)
    return ops.mul(ops.sum(ops.mul(log_probs, one_hot)), -1.0 / len(labels))
