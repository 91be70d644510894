"""
Generator Networks
Time-conditioned MLPs for noise prediction and flow velocity
"""

import logging
import math
from typing import Union

import numpy as np

from grad_core import ops
from grad_core.layers import init_mlp, mlp_forward, mlp_widths
from grad_core.optim import ParamSet
from grad_core.rng import make_rng
from grad_core.tensor import Tensor, no_tape

from .errors import StepOutOfRange, TOutOfRange

logger = logging.getLogger(__name__)

PREFIX = "net"
TIME_SCALE = 1000.0


def timestep_embedding(t_frac: Union[float, np.ndarray], dim: int = 32) -> np.ndarray:
    """Sinusoidal features of t_frac * 1000; (dim,) for a scalar, (b, dim) for a vector"""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t_frac, dtype=np.float64)[..., None] * TIME_SCALE * freqs
    return np.concatenate([np.sin(args), np.cos(args)], axis=-1)


class TimeConditionedMLP:
    """ReLU MLP over [latent, time embedding]; output has the latent's shape"""

    kind = "mlp"

    def __init__(
        self,
        dim: int,
        hidden: int = 512,
        depth: int = 3,
        time_dim: int = 32,
        seed: int = 0,
        params: ParamSet = None,
    ):
        if params is None:
            params = ParamSet()
            widths = [dim + time_dim] + [hidden] * depth + [dim]
            init_mlp(params, PREFIX, widths, make_rng(seed, f"{self.kind}-init"), gain=math.sqrt(2.0))
        self.params = params
        widths = mlp_widths(params, PREFIX)
        self.dim = widths[-1]
        self.time_dim = widths[0] - widths[-1]
        self.hidden = widths[1]
        self.depth = len(widths) - 2
        logger.debug(f"🧠 {type(self).__name__} initialized: dim={self.dim} hidden={self.hidden} depth={self.depth}")

    @classmethod
    def from_params(cls, params: ParamSet):
        return cls(dim=0, params=params)

    def forward(self, z: Union[Tensor, np.ndarray], t_frac: Union[float, np.ndarray]) -> Tensor:
        z = ops.lift(z)
        temb = timestep_embedding(t_frac, self.time_dim)
        if z.ndim == 2 and temb.ndim == 1:
            temb = np.broadcast_to(temb, (z.shape[0], self.time_dim))
        h = ops.concat([z, temb], axis=z.ndim - 1)
        return mlp_forward(self.params, PREFIX, h, activation="relu")

    def _predict(self, z: np.ndarray, t_frac: Union[float, np.ndarray]) -> np.ndarray:
        with no_tape():
            return self.forward(np.asarray(z, dtype=np.float64), t_frac).numpy().copy()


class DenoiserNet(TimeConditionedMLP):
    """Predicts the noise in z_t at discrete step t"""

    kind = "denoiser"

    def __init__(self, *args, num_steps: int = 50, **kwargs):
        self.num_steps = num_steps
        super().__init__(*args, **kwargs)

    @classmethod
    def from_params(cls, params: ParamSet, num_steps: int = 50):
        return cls(dim=0, params=params, num_steps=num_steps)

    def t_frac(self, t: Union[int, np.ndarray]) -> Union[float, np.ndarray]:
        return np.asarray(t, dtype=np.float64) / self.num_steps

    def predict(self, z: np.ndarray, t: int) -> np.ndarray:
        if not 0 <= t < self.num_steps:
            raise StepOutOfRange(f"step {t} outside [0, {self.num_steps})")
        return self._predict(z, self.t_frac(t))


class VelocityNet(TimeConditionedMLP):
    """Predicts the flow velocity at continuous time t in [0, 1]"""

    kind = "velocity"

    def predict(self, z: np.ndarray, t: float) -> np.ndarray:
        if not 0.0 <= t <= 1.0:
            raise TOutOfRange(f"flow time {t} outside [0, 1]")
        return self._predict(z, t)
