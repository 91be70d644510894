"""
Texture Baseline
Texture-label classifier whose penultimate layer serves as a comparison embedding
"""

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field
from sklearn.metrics import accuracy_score

from grad_core import ops
from grad_core.layers import init_mlp, mlp_forward
from grad_core.optim import AdamConfig, ParamSet, optimizer_step
from grad_core.rng import make_rng
from grad_core.tensor import Tape, backward, no_tape
from grad_core.training import LossCurve, minibatches, progress
from shapeworld.dataset_builder import ShapeWorld

from .embedding_net import INPUT_DIM, EmbeddingNet
from .evaluation import odd_one_out_accuracy
from .losses import cross_entropy
from .teacher_trainer import CURVE_COLUMNS

logger = logging.getLogger(__name__)

HEAD = "head"


class BaselineTrainConfig(BaseModel):
    lr: float = Field(default=1e-3, gt=0)
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=64, ge=1)
    hidden: List[int] = Field(default_factory=lambda: [256, 128])
    embedding_dim: int = Field(default=32, ge=2)
    seed: int = 0

    def widths(self) -> Tuple[int, ...]:
        return (INPUT_DIM, *self.hidden, self.embedding_dim)


class TextureBaseline:
    """Embedding trunk plus a linear texture head over tanh(features)"""

    def __init__(self, config: BaselineTrainConfig, textures: List[str]):
        self.config = config
        self.textures = list(textures)
        self.trunk = EmbeddingNet(config.widths(), seed=config.seed)
        self.head = ParamSet()
        init_mlp(self.head, HEAD, (config.embedding_dim, len(self.textures)), make_rng(config.seed, "baseline-head"))
        self.adam = AdamConfig(lr=config.lr)
        logger.info(f"🧠 Texture baseline initialized over {len(self.textures)} texture classes")

    def logits(self, x):
        return mlp_forward(self.head, HEAD, ops.tanh(self.trunk.features(x)))

    def predict(self, images: np.ndarray) -> np.ndarray:
        with no_tape():
            return np.argmax(self.logits(images).numpy(), axis=1)

    def _step(self, images: np.ndarray, labels: np.ndarray) -> float:
        with Tape() as tape:
            loss = cross_entropy(self.logits(images), labels)
        grads = backward(loss, tape)
        optimizer_step(self.trunk.params, grads, self.adam)
        optimizer_step(self.head, grads, self.adam)
        return loss.item()

    def train(self, world: ShapeWorld) -> Tuple[EmbeddingNet, LossCurve]:
        config = self.config
        index = {tag: i for i, tag in enumerate(self.textures)}
        train_ids = world.ids("train")
        val_ids = world.ids("val")
        world.sampler("train")  # same split preconditions as the teacher
        val_triplets = world.triplets("val")
        x_train = world.stack(train_ids)
        y_train = np.array([index[world.record(i).texture] for i in train_ids])
        x_val = world.stack(val_ids)
        y_val = np.array([index[world.record(i).texture] for i in val_ids])
        curve = LossCurve(CURVE_COLUMNS)

        logger.info(f"🎯 Training texture baseline on {len(train_ids)} images for {config.epochs} epochs")
        epochs = progress(range(config.epochs), desc="baseline")
        for epoch in epochs:
            rng = make_rng(config.seed, "baseline-epoch", epoch)
            losses = [self._step(x_train[b], y_train[b]) * len(b) for b in minibatches(len(train_ids), config.batch_size, rng)]
            row = {"train_loss": float(np.sum(losses) / len(train_ids))}
            if len(val_ids):
                with no_tape():
                    row["val_loss"] = cross_entropy(self.logits(x_val), y_val).item()
            if val_triplets:
                row["val_acc"] = odd_one_out_accuracy(self.trunk, val_triplets, world.images)
            curve.log(epoch, **row)
            epochs.set_postfix(loss=f"{row['train_loss']:.4f}")

        if len(val_ids):
            texture_acc = accuracy_score(y_val, self.predict(x_val))
            logger.info(f"✅ Texture baseline val texture accuracy: {texture_acc:.3f}")
        return self.trunk, curve


def train_texture_baseline(world: ShapeWorld, config: BaselineTrainConfig) -> Tuple[EmbeddingNet, LossCurve]:
    """Trains on texture labels; returns the trunk, whose normalized features are the embedding"""
    textures = sorted({r.texture for r in world.manifest.images})
    return TextureBaseline(config, textures).train(world)
