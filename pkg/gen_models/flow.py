"""
Flow Matching
Linear-interpolant velocity training and Euler integration from noise (t=0) to data (t=1)
"""

import logging
from typing import Tuple

import numpy as np

from grad_core.training import LossCurve

from .diffusion import GeneratorTrainConfig, fit_generator, initial_noise
from .errors import TOutOfRange
from .networks import VelocityNet

logger = logging.getLogger(__name__)


def flow_pair(x0: np.ndarray, x1: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """point = (1 - t) x1 + t x0, velocity = x0 - x1"""
    if not 0.0 <= t <= 1.0:
        raise TOutOfRange(f"flow time {t} outside [0, 1]")
    return (1.0 - t) * x1 + t * x0, x0 - x1


def euler_step(z: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    if dt <= 0:
        raise TOutOfRange(f"Euler step needs dt > 0, got {dt}")
    return z + v * dt


def train_velocity(latents: np.ndarray, config: GeneratorTrainConfig) -> Tuple[VelocityNet, LossCurve]:
    """MSE to the interpolant velocity at uniformly drawn t"""
    net = VelocityNet(latents.shape[1], config.hidden, config.depth, config.time_dim, seed=config.seed)

    def make_batch(rng, x0):
        t = rng.random(len(x0))
        x1 = rng.standard_normal(x0.shape)
        point = (1.0 - t)[:, None] * x1 + t[:, None] * x0
        return point, t, x0 - x1

    curve = fit_generator(net, latents, config, make_batch, "velocity")
    return net, curve


def euler_sample(velocity_net, num_steps: int, seed: int, dim: int) -> np.ndarray:
    """Unguided Euler integration; step k evaluates the field at t = k / num_steps"""
    dt = 1.0 / num_steps
    z = initial_noise(seed, dim)
    for k in range(num_steps):
        z = euler_step(z, velocity_net.predict(z, k * dt), dt)
    return z
