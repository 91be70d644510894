"""
Teacher Trainer
Fits the embedding net with the triplet margin loss on shape triplets
"""

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field

from grad_core import ops
from grad_core.optim import AdamConfig, optimizer_step
from grad_core.rng import make_rng
from grad_core.tensor import Tape, backward, no_tape
from grad_core.training import LossCurve, progress
from shapeworld.dataset_builder import ShapeWorld
from shapeworld.triplets import Triplet

from .embedding_net import INPUT_DIM, EmbeddingNet
from .evaluation import odd_one_out_accuracy
from .losses import triplet_loss

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("train_loss", "val_loss", "val_acc")


class TeacherTrainConfig(BaseModel):
    margin: float = Field(default=0.2, gt=0)
    lr: float = Field(default=1e-3, gt=0)
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=64, ge=1)
    triplets_per_epoch: int = Field(default=1024, ge=1)
    hidden: List[int] = Field(default_factory=lambda: [256, 128])
    embedding_dim: int = Field(default=32, ge=2)
    seed: int = 0

    def widths(self) -> Tuple[int, ...]:
        return (INPUT_DIM, *self.hidden, self.embedding_dim)


def _triplet_batch(world: ShapeWorld, triplets: List[Triplet]) -> np.ndarray:
    """Anchors, positives, negatives stacked into one (3b, 3072) matrix"""
    columns = list(zip(*(t.as_tuple() for t in triplets)))
    return np.concatenate([world.stack(list(col)) for col in columns], axis=0)


def triplet_batch_loss(net: EmbeddingNet, batch: np.ndarray, margin: float):
    """One forward pass over the stacked batch, sliced back into the three roles"""
    b = batch.shape[0] // 3
    emb = net.embed_tensor(batch)
    a = ops.slice(emb, np.s_[0:b])
    p = ops.slice(emb, np.s_[b:2 * b])
    n = ops.slice(emb, np.s_[2 * b:3 * b])
    return triplet_loss(a, p, n, margin)


class TeacherTrainer:
    """Triplet-margin training of the shape teacher"""

    def __init__(self, config: TeacherTrainConfig):
        self.config = config
        self.adam = AdamConfig(lr=config.lr)
        logger.info(f"🧠 Teacher trainer initialized (margin={config.margin}, epochs={config.epochs})")

    def validation_loss(self, net: EmbeddingNet, world: ShapeWorld, triplets: List[Triplet]) -> float:
        losses = []
        with no_tape():
            for start in range(0, len(triplets), self.config.batch_size):
                chunk = triplets[start:start + self.config.batch_size]
                losses.append(triplet_batch_loss(net, _triplet_batch(world, chunk), self.config.margin).item() * len(chunk))
        return float(np.sum(losses) / len(triplets))

    def train(self, world: ShapeWorld) -> Tuple[EmbeddingNet, LossCurve]:
        config = self.config
        sampler = world.sampler("train")
        val_triplets = world.triplets("val")
        net = EmbeddingNet(config.widths(), seed=config.seed)
        curve = LossCurve(CURVE_COLUMNS)

        logger.info(f"🎯 Training teacher on {len(world.ids('train'))} images for {config.epochs} epochs")
        epochs = progress(range(config.epochs), desc="teacher")
        for epoch in epochs:
            rng = make_rng(config.seed, "teacher-epoch", epoch)
            triplets = sampler.sample_many(rng, config.triplets_per_epoch)
            batch_losses = []
            for start in range(0, len(triplets), config.batch_size):
                batch = _triplet_batch(world, triplets[start:start + config.batch_size])
                with Tape() as tape:
                    loss = triplet_batch_loss(net, batch, config.margin)
                grads = backward(loss, tape)
                optimizer_step(net.params, grads, self.adam)
                batch_losses.append(loss.item())

            row = {"train_loss": float(np.mean(batch_losses))}
            if val_triplets:
                row["val_loss"] = self.validation_loss(net, world, val_triplets)
                row["val_acc"] = odd_one_out_accuracy(net, val_triplets, world.images)
            curve.log(epoch, **row)
            epochs.set_postfix(loss=f"{row['train_loss']:.4f}")
            logger.debug(f"teacher epoch {epoch}: {row}")

        if val_triplets:
            logger.info(f"✅ Teacher val odd-one-out accuracy: {odd_one_out_accuracy(net, val_triplets, world.images):.3f}")
        return net, curve


def train_teacher(world: ShapeWorld, config: TeacherTrainConfig) -> Tuple[EmbeddingNet, LossCurve]:
    return TeacherTrainer(config).train(world)
