import numpy as np
import pytest

from crossprompt.exceptions import ContractViolation
from crossprompt.models import EncoderConfig, PromptMode
from crossprompt.numeric import Rng, Tensor
from crossprompt.prompting import (
    AlignerParams,
    PromptSet,
    count_trainable,
    cross_modal_prompts,
    enumerate_trainable,
    init_aligner,
    init_prompts,
    inject_values,
    project_t2v,
    project_v2t,
    trainable_tensors,
)


def aligner_from(v2t):
    v2t = np.asarray(v2t, dtype=float)
    return AlignerParams(v2t=[Tensor(v2t)], t2v=[Tensor(np.zeros(v2t.T.shape))])


class TestParameterCount:
    def test_vit_b16_shaped(self):
        assert count_trainable(EncoderConfig.vit_b16_shaped(), depth=12, length=2) == 9_467_904

    def test_mini(self, mini_config):
        assert count_trainable(mini_config, depth=4, length=2) == 33_792

    def test_depth_zero_is_zero(self, mini_config):
        for mode in PromptMode:
            assert count_trainable(mini_config, depth=0, length=4, mode=mode) == 0

    def test_shared_aligner_variant(self, mini_config):
        per_layer = count_trainable(mini_config, depth=4, length=2)
        shared = count_trainable(mini_config, depth=4, length=2, per_layer_aligner=False)
        assert per_layer - shared == 3 * 2 * 64 * 64

    @pytest.mark.parametrize("mode", list(PromptMode))
    @pytest.mark.parametrize("depth,length", [(1, 1), (2, 3), (4, 2)])
    def test_enumeration_matches_formula(self, mini_config, mode, depth, length):
        prompts = init_prompts(mini_config, depth, length, Rng(0), mode=mode)
        aligner = init_aligner(mini_config, depth, mode=mode)
        expected = count_trainable(mini_config, depth, length, mode=mode)
        assert enumerate_trainable(prompts, aligner, mode) == expected

    def test_text_only_trains_no_visual_tensors(self, mini_config):
        prompts = init_prompts(mini_config, 2, 2, Rng(0), mode=PromptMode.TEXT_ONLY)
        aligner = init_aligner(mini_config, 2, mode=PromptMode.TEXT_ONLY)
        names = trainable_tensors(prompts, aligner, PromptMode.TEXT_ONLY)
        assert sorted(names) == ["prompt.text.0", "prompt.text.1"]

    def test_independent_mode_freezes_aligners(self, mini_config):
        prompts = init_prompts(mini_config, 1, 2, Rng(0))
        aligner = init_aligner(mini_config, 1)
        names = trainable_tensors(prompts, aligner, PromptMode.INDEPENDENT)
        assert not any(name.startswith("aligner.") for name in names)


class TestInitialization:
    def test_prompt_shapes(self, mini_config):
        prompts = init_prompts(mini_config, 3, 4, Rng(1))
        assert prompts.depth == 3 and prompts.length == 4
        assert all(t.shape == (4, 64) for t in prompts.text)
        assert all(v.shape == (4, 64) for v in prompts.vision)

    def test_init_is_deterministic(self, mini_config):
        a = init_prompts(mini_config, 2, 2, Rng(9))
        b = init_prompts(mini_config, 2, 2, Rng(9))
        for x, y in zip(a.text + a.vision, b.text + b.vision):
            assert x.tobytes() == y.tobytes()

    def test_aligners_start_at_zero(self, tiny_config):
        aligner = init_aligner(tiny_config, 2)
        assert aligner.depth == 2
        assert all(not a.data.any() for a in aligner.v2t + aligner.t2v)

    def test_depth_beyond_layers_rejected(self, tiny_config):
        with pytest.raises(ContractViolation):
            init_prompts(tiny_config, tiny_config.layers + 1, 2, Rng(0))

    def test_mismatched_prompt_lengths_rejected(self):
        with pytest.raises(ValueError):
            PromptSet(text=[Tensor(np.zeros((2, 4)))], vision=[Tensor(np.zeros((3, 4)))])

    def test_non_transposed_aligner_pair_rejected(self):
        with pytest.raises(ValueError):
            AlignerParams(v2t=[Tensor(np.zeros((2, 3)))], t2v=[Tensor(np.zeros((2, 3)))])

    def test_replace_swaps_named_tensors(self, tiny_config):
        prompts = init_prompts(tiny_config, 2, 2, Rng(0))
        new = Tensor(np.ones((2, 8)))
        replaced = prompts.replace({"prompt.vision.1": new})
        assert replaced.vision[1] is new
        assert replaced.text[0] is prompts.text[0]


class TestProjection:
    def test_known_value(self):
        aligner = aligner_from([[1, 0, 2], [0, -1, 1]])
        out = project_v2t(aligner, Tensor([[1.0, 2.0, 3.0]]), 0)
        np.testing.assert_array_equal(out.data, [[7.0, 1.0]])

    def test_identity_returns_input(self):
        visual = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
        out = project_v2t(aligner_from(np.eye(4)), visual, 0)
        np.testing.assert_array_equal(out.data, visual.data)

    def test_zero_aligner_gives_zeros(self, tiny_config):
        aligner = init_aligner(tiny_config, 1)
        visual = Tensor(np.random.default_rng(1).normal(size=(2, 8)))
        assert not project_v2t(aligner, visual, 0).data.any()

    def test_text_to_vision_matches_oracle(self):
        rng = np.random.default_rng(2)
        t2v = rng.normal(size=(5, 3))
        aligner = AlignerParams(v2t=[Tensor(t2v.T)], t2v=[Tensor(t2v)])
        text = rng.normal(size=(2, 3))
        out = project_t2v(aligner, Tensor(text), 0)
        np.testing.assert_allclose(out.data, text @ t2v.T, rtol=0, atol=1e-12)

    def test_width_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            project_v2t(aligner_from(np.eye(3)), Tensor(np.zeros((2, 4))), 0)

    def test_layer_outside_depth_rejected(self):
        with pytest.raises(ContractViolation):
            project_v2t(aligner_from(np.eye(3)), Tensor(np.zeros((2, 3))), 1)

    def test_cross_modal_prompts_per_layer(self, tiny_config):
        rng = np.random.default_rng(3)
        prompts = init_prompts(tiny_config, 2, 2, Rng(4), std=1.0)
        aligner = AlignerParams(
            v2t=[Tensor(rng.normal(size=(8, 8))) for _ in range(2)],
            t2v=[Tensor(rng.normal(size=(8, 8))) for _ in range(2)],
        )
        text_injected, visual, vision_injected = cross_modal_prompts(prompts, aligner)
        for layer in range(2):
            np.testing.assert_allclose(
                text_injected[layer].data,
                prompts.vision[layer].data @ aligner.v2t[layer].data.T,
                rtol=0,
                atol=1e-12,
            )
            np.testing.assert_allclose(
                vision_injected[layer].data,
                prompts.text[layer].data @ aligner.t2v[layer].data.T,
                rtol=0,
                atol=1e-12,
            )
        assert visual == list(prompts.vision)

    def test_text_only_has_no_injection(self, tiny_config):
        prompts = init_prompts(tiny_config, 2, 2, Rng(0), mode=PromptMode.TEXT_ONLY)
        text_injected, visual, vision_injected = cross_modal_prompts(prompts, AlignerParams())
        assert text_injected is None and vision_injected is None and visual == []


class TestInjection:
    def test_stream_layout(self):
        tokens = Tensor(np.arange(12.0).reshape(2, 3, 2))
        direct = Tensor([[10.0, 11.0]])
        injected = Tensor([[1.0, 1.0]])
        stream, values = inject_values(tokens, direct, injected)
        assert stream.shape == (2, 4, 2)
        np.testing.assert_array_equal(stream.data[:, :3], tokens.data)
        np.testing.assert_array_equal(stream.data[:, 3], [[10.0, 11.0]] * 2)
        np.testing.assert_array_equal(values.data[:, :3], tokens.data)
        np.testing.assert_array_equal(values.data[:, 3], [[11.0, 12.0]] * 2)

    def test_no_injection_has_no_value_stream(self):
        _, values = inject_values(Tensor(np.zeros((1, 2, 2))), Tensor(np.ones((1, 2))))
        assert values is None

    def test_width_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            inject_values(Tensor(np.zeros((1, 2, 3))), Tensor(np.ones((1, 2))))

    def test_injected_shape_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            inject_values(
                Tensor(np.zeros((1, 2, 2))), Tensor(np.ones((1, 2))), Tensor(np.ones((2, 2)))
            )
