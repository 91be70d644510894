"""
Discrete Diffusion
Epsilon-prediction training and unguided DDIM sampling
"""

import logging
from typing import Callable, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from grad_core import ops
from grad_core.optim import AdamConfig, optimizer_step
from grad_core.rng import make_rng
from grad_core.tensor import Tape, backward
from grad_core.training import LossCurve, minibatches, progress
from shapeworld.errors import EmptySplit

from .decoder import MODES, AutoencoderConfig
from .networks import DenoiserNet, TimeConditionedMLP
from .schedule import BETA_END, BETA_START, DEFAULT_STEPS, NoiseSchedule, ddim_step, q_sample, timesteps

logger = logging.getLogger(__name__)

# (rng, x0 batch) -> (net input, time fractions, regression target)
BatchFn = Callable[[np.random.Generator, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


class GeneratorTrainConfig(BaseModel):
    epochs: int = Field(default=200, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=64, ge=1)
    hidden: int = Field(default=512, ge=1)
    depth: int = Field(default=3, ge=1)
    time_dim: int = Field(default=32, ge=2)
    num_steps: int = Field(default=DEFAULT_STEPS, ge=1)
    beta_start: float = Field(default=BETA_START, gt=0, lt=1)
    beta_end: float = Field(default=BETA_END, gt=0, lt=1)
    decoder_mode: str = "identity"
    autoencoder: AutoencoderConfig = Field(default_factory=AutoencoderConfig)
    seed: int = 0

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.num_steps, self.beta_start, self.beta_end)

    @field_validator("decoder_mode")
    @classmethod
    def _known_mode(cls, value: str) -> str:
        if value not in MODES:
            raise ValueError(f"decoder_mode must be one of {MODES}")
        return value


def initial_noise(seed: int, dim: int) -> np.ndarray:
    """Starting latent shared by guided and unguided samplers of the same seed"""
    return make_rng(seed, "initial-noise").standard_normal(dim)


def fit_generator(net: TimeConditionedMLP, latents: np.ndarray, config: GeneratorTrainConfig, make_batch: BatchFn, tag: str) -> LossCurve:
    """MSE regression of net(input, t) onto the batch target"""
    if len(latents) == 0:
        raise EmptySplit(f"{tag} training needs at least one training image")
    adam = AdamConfig(lr=config.lr)
    curve = LossCurve(["train_loss"])
    logger.info(f"🎯 Training {tag} on {len(latents)} latents for {config.epochs} epochs")
    epochs = progress(range(config.epochs), desc=tag)
    for epoch in epochs:
        rng = make_rng(config.seed, f"{tag}-epoch", epoch)
        total = 0.0
        for batch in minibatches(len(latents), config.batch_size, rng):
            inputs, t_frac, target = make_batch(rng, latents[batch])
            with Tape() as tape:
                loss = ops.mean(ops.square(ops.sub(net.forward(inputs, t_frac), target)))
            optimizer_step(net.params, backward(loss, tape), adam)
            total += loss.item() * len(batch)
        curve.log(epoch, train_loss=total / len(latents))
        epochs.set_postfix(loss=f"{total / len(latents):.4f}")
    logger.info(f"✅ {tag} training finished, final loss {curve.last('train_loss'):.4f}")
    return curve


def train_denoiser(latents: np.ndarray, schedule: NoiseSchedule, config: GeneratorTrainConfig) -> Tuple[DenoiserNet, LossCurve]:
    """Epsilon-prediction MSE over uniformly drawn steps"""
    net = DenoiserNet(latents.shape[1], config.hidden, config.depth, config.time_dim, seed=config.seed, num_steps=schedule.num_steps)

    def make_batch(rng, x0):
        t = rng.integers(0, schedule.num_steps, size=len(x0))
        noise = rng.standard_normal(x0.shape)
        ab = schedule.alpha_bars[t][:, None]
        return q_sample(x0, noise, ab), net.t_frac(t), noise

    curve = fit_generator(net, latents, config, make_batch, "denoiser")
    return net, curve


def ddim_sample(denoiser, schedule: NoiseSchedule, seed: int, dim: int) -> np.ndarray:
    """Unguided T-step deterministic chain from seeded noise"""
    z = initial_noise(seed, dim)
    for t in timesteps(schedule):
        eps = denoiser.predict(z, int(t))
        z = ddim_step(z, eps, int(t), int(t) - 1, schedule)
    return z
