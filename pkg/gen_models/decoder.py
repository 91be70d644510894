"""
Decoder
Latent -> [0, 1] image map: fixed sigmoid squash or a tiny trained autoencoder
"""

import logging
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from grad_core import ops
from grad_core.errors import ConfigError, ShapeMismatch
from grad_core.layers import init_mlp, mlp_forward, mlp_widths
from grad_core.optim import AdamConfig, ParamSet, optimizer_step
from grad_core.rng import make_rng
from grad_core.tensor import Tape, Tensor, backward, no_tape
from grad_core.training import LossCurve, minibatches, progress

logger = logging.getLogger(__name__)

PIXEL_DIM = 3 * 32 * 32
SQUASH_SLOPE = 4.0
PIXEL_CLIP = 1e-3
MODES = ("identity", "tiny_autoencoder")


class AutoencoderConfig(BaseModel):
    latent_dim: int = Field(default=256, ge=1)
    hidden: int = Field(default=512, ge=1)
    epochs: int = Field(default=100, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=64, ge=1)
    seed: int = 0


class Decoder:
    """identity: latent space is pixel space behind sigmoid(4(z - 0.5)); tiny_autoencoder: learned 256-d code"""

    def __init__(self, mode: str = "identity", params: ParamSet = None):
        if mode not in MODES:
            raise ConfigError(f"unknown decoder mode: {mode}")
        if mode == "tiny_autoencoder" and params is None:
            raise ConfigError("autoencoder decoder needs parameters")
        self.mode = mode
        self.params = params
        if mode == "identity":
            self.latent_dim = PIXEL_DIM
        else:
            self.latent_dim = mlp_widths(params, "dec")[0]
        logger.debug(f"🧠 Decoder initialized in {mode} mode (latent dim {self.latent_dim})")

    @classmethod
    def identity(cls) -> "Decoder":
        return cls("identity")

    @classmethod
    def autoencoder(cls, config: AutoencoderConfig) -> "Decoder":
        params = ParamSet()
        rng = make_rng(config.seed, "autoencoder-init")
        init_mlp(params, "enc", (PIXEL_DIM, config.hidden, config.latent_dim), rng)
        init_mlp(params, "dec", (config.latent_dim, config.hidden, PIXEL_DIM), rng)
        return cls("tiny_autoencoder", params)

    def decode(self, z: Union[Tensor, np.ndarray]) -> Tensor:
        """Flat image(s) in [0, 1]; differentiable in z"""
        z = ops.lift(z)
        if z.shape[-1] != self.latent_dim:
            raise ShapeMismatch(f"decoder expects latent dim {self.latent_dim}, got {z.shape}")
        if self.mode == "identity":
            return ops.sigmoid(ops.mul(ops.sub(z, 0.5), SQUASH_SLOPE))
        return mlp_forward(self.params, "dec", z, activation="tanh", final_activation="sigmoid")

    def encode(self, pixels: np.ndarray) -> np.ndarray:
        """(n, 3072) pixels -> (n, latent_dim) latents, never recorded"""
        pixels = np.asarray(pixels, dtype=np.float64)
        if pixels.shape[-1] != PIXEL_DIM:
            raise ShapeMismatch(f"encoder expects {PIXEL_DIM} pixels, got {pixels.shape}")
        if self.mode == "identity":
            p = np.clip(pixels, PIXEL_CLIP, 1.0 - PIXEL_CLIP)
            return 0.5 + np.log(p / (1.0 - p)) / SQUASH_SLOPE
        with no_tape():
            return self._encode_tensor(pixels).numpy().copy()

    def _encode_tensor(self, pixels) -> Tensor:
        return mlp_forward(self.params, "enc", ops.sub(pixels, 0.5), activation="tanh", final_activation="tanh")

    def decode_image(self, z: np.ndarray) -> np.ndarray:
        with no_tape():
            return self.decode(z).numpy().reshape(3, 32, 32).copy()


def train_autoencoder(images: np.ndarray, config: AutoencoderConfig) -> Tuple[Decoder, LossCurve]:
    """Reconstruction MSE on (n, 3072) images"""
    decoder = Decoder.autoencoder(config)
    adam = AdamConfig(lr=config.lr)
    curve = LossCurve(["train_loss"])
    n = len(images)
    logger.info(f"🎯 Training tiny autoencoder ({config.latent_dim}-d code) on {n} images")
    epochs = progress(range(config.epochs), desc="autoencoder")
    for epoch in epochs:
        rng = make_rng(config.seed, "autoencoder-epoch", epoch)
        total = 0.0
        for batch in minibatches(n, config.batch_size, rng):
            x = images[batch]
            with Tape() as tape:
                recon = decoder.decode(decoder._encode_tensor(x))
                loss = ops.mean(ops.square(ops.sub(recon, x)))
            optimizer_step(decoder.params, backward(loss, tape), adam)
            total += loss.item() * len(batch)
        curve.log(epoch, train_loss=total / n)
        epochs.set_postfix(loss=f"{total / n:.5f}")
    return decoder, curve


def reconstruction_mse(decoder: Decoder, images: np.ndarray) -> float:
    with no_tape():
        recon = decoder.decode(decoder.encode(images)).numpy()
    return float(np.mean((recon - images) ** 2))
