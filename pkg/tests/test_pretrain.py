import numpy as np
import pytest

from crossprompt.encoders import init_backbone
from crossprompt.exceptions import PretrainingFailure
from crossprompt.models import PretrainConfig
from crossprompt.numeric import Rng, finite_diff_check
from crossprompt.training import contrastive_loss, pretrain_base, zero_shot_accuracy


@pytest.fixture
def base_set(tiny_benchmark):
    return tiny_benchmark[0]


def test_zero_iterations_stays_near_chance(base_set, tiny_config):
    config = PretrainConfig(max_iterations=0, target_accuracy=0.85, seed=1)
    result = pretrain_base(config, base_set, encoder=tiny_config)
    assert result.iterations == 0
    assert result.accuracy == result.initial_accuracy
    assert not result.reached_target
    # 24 classes, 48 held-out images: chance is about 0.04
    assert result.accuracy < 0.3


def test_loss_is_finite(base_set, tiny_config):
    config = PretrainConfig(
        max_iterations=4, batch_size=8, target_accuracy=1.0, eval_every=2, learning_rate=1e-2
    )
    result = pretrain_base(config, base_set, encoder=tiny_config)
    assert result.iterations == 4
    assert len(result.loss_trace) == 4
    assert np.all(np.isfinite(result.loss_trace))


def test_weights_change_and_stay_shaped(base_set, tiny_config):
    config = PretrainConfig(max_iterations=2, batch_size=4, target_accuracy=1.0, init_std=0.1)
    result = pretrain_base(config, base_set, encoder=tiny_config)
    assert result.weights.config == tiny_config
    fresh = pretrain_base(config.model_copy(update={"max_iterations": 0}), base_set, tiny_config)
    assert result.weights.fingerprint() != fresh.weights.fingerprint()


def test_already_at_target_trains_nothing(base_set, tiny_config):
    config = PretrainConfig(max_iterations=50, target_accuracy=0.0)
    result = pretrain_base(config, base_set, encoder=tiny_config)
    assert result.iterations == 0 and result.reached_target


def test_strict_mode_reports_failure(base_set, tiny_config):
    config = PretrainConfig(max_iterations=1, batch_size=4, target_accuracy=1.0, eval_every=1)
    with pytest.raises(PretrainingFailure) as info:
        pretrain_base(config, base_set, encoder=tiny_config, strict=True)
    assert info.value.iterations == 1
    assert info.value.target_accuracy == 1.0


def test_is_deterministic(base_set, tiny_config):
    config = PretrainConfig(max_iterations=2, batch_size=4, target_accuracy=1.0, seed=3)
    a = pretrain_base(config, base_set, encoder=tiny_config)
    b = pretrain_base(config, base_set, encoder=tiny_config)
    assert a.weights.fingerprint() == b.weights.fingerprint()
    assert a.loss_trace == b.loss_trace


def test_contrastive_loss_gradients(tiny_backbone, base_set):
    images = base_set.train_images[:3]
    labels = base_set.train_labels[:3]
    names = base_set.class_names[:4]
    labels = labels % len(names)
    params = {
        name: tensor
        for name, tensor in tiny_backbone.named_tensors()
        if name in ("text.projection", "vision.projection", "text.blocks.1.value_weight")
    }

    def loss_fn(p):
        return contrastive_loss(tiny_backbone.replace_tensors(p), images, labels, names, tau=1.0)

    assert finite_diff_check(loss_fn, params, eps=1e-5) < 1e-5


def test_zero_shot_accuracy_in_unit_interval(tiny_config, base_set):
    weights = init_backbone(tiny_config, Rng(0))
    assert 0.0 <= zero_shot_accuracy(weights, base_set) <= 1.0
