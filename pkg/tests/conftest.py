"""Shared fixtures: a tiny world and tiny models so the suite runs in seconds"""

import numpy as np
import pytest

from gen_models.decoder import Decoder
from gen_models.networks import DenoiserNet, VelocityNet
from gen_models.schedule import NoiseSchedule
from hpe_teacher.embedding_net import EmbeddingNet
from shapeworld.dataset_builder import DatasetConfig, build_dataset

TINY_WIDTHS = (3072, 16, 8, 4)


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run full-size training tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def tiny_dataset_config():
    return DatasetConfig(
        n_images=24,
        shapes=["circle", "square", "triangle"],
        textures=["solid", "stripes"],
        val_fraction=0.25,
        train_triplets=40,
        val_triplets=12,
        seed=0,
    )


@pytest.fixture
def tiny_world(tiny_dataset_config):
    return build_dataset(tiny_dataset_config)


@pytest.fixture
def persisted_world(tiny_dataset_config, tmp_path):
    return build_dataset(tiny_dataset_config, tmp_path / "data")


@pytest.fixture
def tiny_teacher():
    return EmbeddingNet(TINY_WIDTHS, seed=3)


@pytest.fixture
def identity_decoder():
    return Decoder.identity()


@pytest.fixture
def short_schedule():
    return NoiseSchedule.linear(num_steps=6)


@pytest.fixture
def tiny_denoiser():
    return DenoiserNet(3072, hidden=8, depth=1, time_dim=4, seed=1, num_steps=6)


@pytest.fixture
def tiny_velocity():
    return VelocityNet(3072, hidden=8, depth=1, time_dim=4, seed=2)


class ZeroNoisePredictor:
    """Denoiser stand-in that always predicts zero noise"""

    def predict(self, z, t):
        return np.zeros_like(z)


class ConstantVelocity:
    """Velocity field that drifts every coordinate toward +1"""

    def predict(self, z, t):
        return np.ones_like(z)


@pytest.fixture
def zero_noise_predictor():
    return ZeroNoisePredictor()


@pytest.fixture
def constant_velocity():
    return ConstantVelocity()
