"""
Embedding Network
Flattened image -> unit-norm shape embedding
"""

import logging
from typing import Sequence, Tuple, Union

import numpy as np

from grad_core import ops
from grad_core.layers import init_mlp, mlp_forward, mlp_widths
from grad_core.optim import ParamSet
from grad_core.rng import make_rng
from grad_core.tensor import Tensor, no_tape

logger = logging.getLogger(__name__)

INPUT_DIM = 3 * 32 * 32
DEFAULT_WIDTHS = (INPUT_DIM, 256, 128, 32)
PREFIX = "embed"

ImageLike = Union[Tensor, np.ndarray]


class EmbeddingNet:
    """MLP over centered pixels; embeddings are projected onto the unit sphere"""

    def __init__(
        self,
        widths: Sequence[int] = DEFAULT_WIDTHS,
        activation: str = "tanh",
        seed: int = 0,
        params: ParamSet = None,
    ):
        if params is None:
            params = ParamSet()
            init_mlp(params, PREFIX, widths, make_rng(seed, "embedding-init"))
        self.params = params
        self.widths: Tuple[int, ...] = tuple(mlp_widths(params, PREFIX))
        self.activation = activation
        logger.debug(f"🧠 EmbeddingNet initialized with widths {self.widths}")

    @classmethod
    def from_params(cls, params: ParamSet, activation: str = "tanh") -> "EmbeddingNet":
        return cls(activation=activation, params=params)

    @property
    def embedding_dim(self) -> int:
        return self.widths[-1]

    def _flatten(self, x: ImageLike) -> Tensor:
        x = ops.lift(x)
        if x.ndim == 3:
            return x.reshape((x.size,))
        if x.ndim == 4:
            return x.reshape((x.shape[0], -1))
        return x

    def features(self, x: ImageLike) -> Tensor:
        """Pre-normalization output of the last layer"""
        h = ops.sub(self._flatten(x), 0.5)
        return mlp_forward(self.params, PREFIX, h, self.activation)

    def embed_tensor(self, x: ImageLike) -> Tensor:
        return ops.normalize(self.features(x), axis=-1)

    def embed_batch(self, images: np.ndarray) -> np.ndarray:
        """(n, 3072) or (n, 3, 32, 32) pixels -> (n, d) embeddings, never recorded"""
        images = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
        with no_tape():
            return self.embed_tensor(images).numpy().copy()


def embed(net: EmbeddingNet, image: ImageLike) -> Tensor:
    """Unit-norm embedding of one 3x32x32 image; differentiable when the image is on a tape"""
    return net.embed_tensor(image)
