"""
Guidance Math
Teacher-space guidance loss, its latent gradient and the normalized update
"""

import logging
from contextlib import ExitStack
from typing import Tuple

import numpy as np

from gen_models.decoder import Decoder
from grad_core import ops
from grad_core.optim import frozen
from grad_core.tensor import Tape, Tensor, backward
from hpe_teacher.embedding_net import EmbeddingNet

logger = logging.getLogger(__name__)

GRAD_EPS = 1e-12


def guidance_loss(z: Tensor, target_embedding: np.ndarray, teacher: EmbeddingNet, decoder: Decoder) -> Tensor:
    """||F(D(z)) - F(I_target)||^2; at most 4 since both embeddings are unit vectors"""
    emb = teacher.embed_tensor(decoder.decode(z))
    return ops.sum(ops.square(ops.sub(emb, target_embedding)))


def guidance_gradient(
    z: np.ndarray,
    target_embedding: np.ndarray,
    teacher: EmbeddingNet,
    decoder: Decoder,
) -> Tuple[float, np.ndarray]:
    """Loss value and d loss / d z with teacher and decoder weights held fixed"""
    with ExitStack() as stack:
        stack.enter_context(frozen(teacher.params))
        if decoder.params is not None:
            stack.enter_context(frozen(decoder.params))
        with Tape() as tape:
            latent = Tensor(z, requires_grad=True)
            loss = guidance_loss(latent, target_embedding, teacher, decoder)
        grads = backward(loss, tape)
    return loss.item(), grads[latent]


def normalized_direction(grad: np.ndarray) -> Tuple[np.ndarray, float, bool]:
    """Unit gradient, its original norm, and whether it cleared the zero-gradient threshold"""
    norm = float(np.linalg.norm(grad))
    if norm <= GRAD_EPS:
        return np.zeros_like(grad), norm, False
    return grad / norm, norm, True


def guided_update(z: np.ndarray, grad: np.ndarray, alpha: float) -> Tuple[np.ndarray, bool]:
    """z - alpha * grad / ||grad||; a vanishing gradient leaves z unchanged and reports False"""
    direction, _, applied = normalized_direction(grad)
    if not applied:
        logger.warning("⚠️ zero guidance gradient, update skipped")
        return z.copy(), False
    return z - alpha * direction, True


def clamp_latent(z: np.ndarray, lo: float = -5.0, hi: float = 5.0) -> np.ndarray:
    return np.clip(z, lo, hi)
