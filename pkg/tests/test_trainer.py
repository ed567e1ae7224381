import numpy as np
import pytest

from crossprompt.exceptions import ContractViolation
from crossprompt.models import PromptMode
from crossprompt.numeric import Rng, Tensor, finite_diff_check
from crossprompt.pool import encode_pool, extract_prototype
from crossprompt.prompting import AlignerParams, init_prompts, trainable_tensors
from crossprompt.training import (
    ema,
    few_shot_subset,
    make_loss_fn,
    sample_batch,
    train_sequence,
    train_task,
)


def tensor_bytes(prompts, aligner):
    return [t.tobytes() for t in prompts.text + prompts.vision + aligner.v2t + aligner.t2v]


@pytest.fixture
def domains(tiny_benchmark):
    return tiny_benchmark[1]


class TestTrainTask:
    def test_zero_iterations_returns_initial_state(self, tiny_backbone, domains, tiny_train_config):
        config = tiny_train_config.model_copy(update={"iterations": 0})
        result = train_task(tiny_backbone, domains[0], config)
        expected = init_prompts(
            tiny_backbone.config,
            tiny_backbone.config.layers,
            config.prompt_length,
            Rng(config.seed).child("task", 0).child("prompts"),
            config.prompt_init_std,
        )
        assert result.loss_trace == []
        trained = result.prompts.text + result.prompts.vision
        for a, b in zip(trained, expected.text + expected.vision):
            assert a.tobytes() == b.tobytes()
        assert all(not a.data.any() for a in result.aligner.v2t + result.aligner.t2v)

    def test_key_matches_independent_extraction(self, tiny_backbone, domains, tiny_train_config):
        result = train_task(tiny_backbone, domains[0], tiny_train_config)
        key = extract_prototype(tiny_backbone, domains[0].class_names)
        assert result.key.vector.tobytes() == key.vector.tobytes()

    def test_loss_trace_is_finite(self, tiny_backbone, domains, tiny_train_config):
        result = train_task(tiny_backbone, domains[0], tiny_train_config)
        assert result.iterations == tiny_train_config.iterations
        assert np.all(np.isfinite(result.loss_trace))

    def test_prompts_move(self, tiny_backbone, domains, tiny_train_config):
        before = train_task(
            tiny_backbone, domains[0], tiny_train_config.model_copy(update={"iterations": 0})
        )
        after = train_task(tiny_backbone, domains[0], tiny_train_config)
        assert tensor_bytes(before.prompts, before.aligner) != tensor_bytes(
            after.prompts, after.aligner
        )

    def test_backbone_is_untouched(self, tiny_backbone, domains, tiny_train_config):
        fingerprint = tiny_backbone.fingerprint()
        train_task(tiny_backbone, domains[0], tiny_train_config)
        assert tiny_backbone.fingerprint() == fingerprint

    def test_independent_mode_keeps_aligners_at_zero(
        self, tiny_backbone, domains, tiny_train_config
    ):
        config = tiny_train_config.model_copy(update={"prompt_mode": PromptMode.INDEPENDENT})
        result = train_task(tiny_backbone, domains[0], config)
        assert all(not a.data.any() for a in result.aligner.v2t + result.aligner.t2v)

    def test_text_only_mode(self, tiny_backbone, domains, tiny_train_config):
        config = tiny_train_config.model_copy(update={"prompt_mode": PromptMode.TEXT_ONLY})
        result = train_task(tiny_backbone, domains[0], config)
        assert result.prompts.vision == [] and result.aligner.depth == 0

    def test_partial_depth(self, tiny_backbone, domains, tiny_train_config):
        config = tiny_train_config.model_copy(update={"prompt_depth": 1})
        result = train_task(tiny_backbone, domains[0], config)
        assert result.prompts.depth == 1 and result.aligner.depth == 1

    def test_empty_training_split_rejected(self, tiny_backbone, domains, tiny_train_config):
        empty = domains[0].model_copy(
            update={
                "train_images": domains[0].train_images[:0],
                "train_labels": domains[0].train_labels[:0],
            }
        )
        with pytest.raises(ContractViolation):
            train_task(tiny_backbone, empty, tiny_train_config)


class TestTrainSequence:
    def test_pool_follows_input_order(self, tiny_backbone, domains, tiny_train_config):
        pool = train_sequence(tiny_backbone, domains, tiny_train_config)
        assert pool.task_ids == [d.task_id for d in domains]
        assert [e.creation_step for e in pool] == [1, 2]

    def test_single_task_pool_matches_train_task(self, tiny_backbone, domains, tiny_train_config):
        pool = train_sequence(tiny_backbone, domains[:1], tiny_train_config)
        result = train_task(tiny_backbone, domains[0], tiny_train_config)
        assert tensor_bytes(pool[0].prompts, pool[0].aligner) == tensor_bytes(
            result.prompts, result.aligner
        )

    def test_earlier_entries_never_change(self, tiny_backbone, domains, tiny_train_config):
        snapshots = []

        def on_task_done(index, result, pool):
            first = pool[0]
            snapshots.append(
                [first.key.vector.tobytes(), *tensor_bytes(first.prompts, first.aligner)]
            )

        train_sequence(tiny_backbone, domains, tiny_train_config, on_task_done=on_task_done)
        assert len(snapshots) == 2
        assert snapshots[0] == snapshots[1]

    def test_repeated_runs_are_bit_identical(self, tiny_backbone, domains, tiny_train_config):
        first = encode_pool(train_sequence(tiny_backbone, domains, tiny_train_config))
        second = encode_pool(train_sequence(tiny_backbone, domains, tiny_train_config))
        assert first == second

    def test_duplicate_task_ids_rejected(self, tiny_backbone, domains, tiny_train_config):
        with pytest.raises(ContractViolation):
            train_sequence(tiny_backbone, [domains[0], domains[0]], tiny_train_config)


def test_end_to_end_gradients_match_finite_differences(tiny_backbone, domains):
    config = tiny_backbone.config
    rng = np.random.default_rng(5)
    prompts = init_prompts(config, 2, 2, Rng(8), std=0.5)
    aligner = AlignerParams(
        v2t=[Tensor(rng.normal(scale=0.3, size=(8, 8))) for _ in range(2)],
        t2v=[Tensor(rng.normal(scale=0.3, size=(8, 8))) for _ in range(2)],
    )
    dataset = domains[0]
    loss_fn = make_loss_fn(
        tiny_backbone,
        prompts,
        aligner,
        dataset.train_images[:2],
        dataset.train_labels[:2],
        dataset.class_names,
        tau=1.0,
    )
    params = trainable_tensors(prompts, aligner, PromptMode.CROSS_MODAL)
    assert len(params) == 8
    assert finite_diff_check(loss_fn, params, eps=1e-5) < 1e-5


class TestSampling:
    def test_batches_are_seeded(self):
        a = sample_batch(10, 32, Rng(3).child("batches"))
        b = sample_batch(10, 32, Rng(3).child("batches"))
        np.testing.assert_array_equal(a, b)
        assert a.min() >= 0 and a.max() < 10

    def test_few_shot_keeps_k_per_class(self, domains):
        subset = few_shot_subset(domains[0], 2, Rng(0))
        counts = np.bincount(subset.train_labels, minlength=subset.n_classes)
        assert np.all(counts == 2)
        assert subset.n_test == domains[0].n_test

    def test_few_shot_with_more_shots_than_samples_keeps_all(self, domains):
        subset = few_shot_subset(domains[0], 1000, Rng(0))
        assert subset.n_train == domains[0].n_train


def test_ema_smooths_toward_recent_values():
    trace = ema([1.0, 0.0, 0.0], window=1)
    np.testing.assert_array_equal(trace, [1.0, 0.0, 0.0])
    smoothed = ema([2.0] * 5 + [1.0] * 200)
    assert smoothed[0] == 2.0 and smoothed[-1] < 1.01
