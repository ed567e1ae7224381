"""Shared fixtures: a tiny encoder, its random backbone and a small benchmark."""

import numpy as np
import pytest

from crossprompt.benchmark import gen_benchmark
from crossprompt.encoders import init_backbone
from crossprompt.models import EncoderConfig, TrainConfig
from crossprompt.numeric import Rng


@pytest.fixture
def tiny_config():
    return EncoderConfig(
        layers=2,
        text_width=8,
        vision_width=8,
        heads=2,
        max_text_tokens=4,
        patch_size=4,
        image_size=8,
        channels=3,
        vocab_size=32,
        joint_width=8,
        mlp_ratio=2,
    )


@pytest.fixture
def tiny_backbone(tiny_config):
    # std 0.3 keeps features far from degenerate in such a small model
    return init_backbone(tiny_config, Rng(1234), std=0.3)


@pytest.fixture
def mini_config():
    return EncoderConfig.mini()


@pytest.fixture
def tiny_benchmark(tiny_config):
    """(base set, two domain tasks) rendered at 8x8."""
    return gen_benchmark(
        seed=3, n_domains=2, n_classes=3, samples_per_class=6, encoder=tiny_config
    )


@pytest.fixture
def tiny_train_config():
    return TrainConfig(
        iterations=3,
        batch_size=4,
        learning_rate=1e-2,
        temperature=0.5,
        prompt_length=2,
        log_every=1,
    )


@pytest.fixture
def random_images(tiny_config):
    rng = np.random.default_rng(7)
    return rng.normal(size=(3, tiny_config.image_size, tiny_config.image_size, 3))
