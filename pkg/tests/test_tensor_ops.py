import numpy as np
import pytest

from crossprompt.exceptions import ContractViolation, DegenerateInputError
from crossprompt.numeric import GradTape, Tensor, backward, finite_diff_check, no_tape, ops


def grads_of(fn, **params):
    with GradTape() as tape:
        for name, tensor in params.items():
            tape.watch(tensor, name)
        loss = fn(**params)
    return backward(tape, loss)


class TestTensor:
    def test_data_is_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_numpy_returns_writable_copy(self):
        t = Tensor([1.0, 2.0])
        copy = t.numpy()
        copy[0] = 5.0
        assert t.data[0] == 1.0

    def test_source_array_is_copied(self):
        source = np.array([1.0, 2.0])
        t = Tensor(source)
        source[0] = 9.0
        assert t.data[0] == 1.0

    def test_item_requires_single_element(self):
        assert Tensor.scalar(2.5).item() == 2.5
        with pytest.raises(ContractViolation):
            Tensor([1.0, 2.0]).item()

    def test_tobytes_is_little_endian_row_major(self):
        t = Tensor([[1.0, 2.0], [3.0, 4.0]])
        assert t.tobytes() == np.array([1.0, 2.0, 3.0, 4.0], dtype="<f8").tobytes()


class TestBackward:
    def test_sum_gradient_is_ones(self):
        grads = grads_of(lambda p: ops.sum(p), p=Tensor([1.0, -2.0, 3.0]))
        np.testing.assert_array_equal(grads["p"].data, [1.0, 1.0, 1.0])

    def test_half_squared_norm_gradient_is_identity(self):
        p = Tensor([0.5, -1.5, 2.0])
        grads = grads_of(lambda p: ops.scale(ops.sum(ops.square(p)), 0.5), p=p)
        np.testing.assert_allclose(grads["p"].data, p.data, rtol=0, atol=1e-15)

    def test_non_scalar_loss_rejected(self):
        with GradTape() as tape:
            p = tape.watch(Tensor([1.0, 2.0]), "p")
            out = ops.scale(p, 2.0)
        with pytest.raises(ContractViolation):
            backward(tape, out)

    def test_unwatched_tensors_get_no_gradient(self):
        frozen = Tensor([1.0, 2.0])
        grads = grads_of(lambda p: ops.sum(ops.mul(p, frozen)), p=Tensor([3.0, 4.0]))
        assert set(grads) == {"p"}
        np.testing.assert_array_equal(grads["p"].data, frozen.data)

    def test_reused_parameter_accumulates(self):
        grads = grads_of(lambda p: ops.sum(ops.add(p, p)), p=Tensor([1.0, 1.0]))
        np.testing.assert_array_equal(grads["p"].data, [2.0, 2.0])

    def test_duplicate_name_for_other_tensor_rejected(self):
        with GradTape() as tape:
            tape.watch(Tensor([1.0]), "p")
            with pytest.raises(ContractViolation):
                tape.watch(Tensor([2.0]), "p")

    def test_no_tape_records_nothing(self):
        with GradTape() as tape:
            p = tape.watch(Tensor([1.0]), "p")
            with no_tape():
                ops.scale(p, 2.0)
        assert tape.node_count == 0


class TestSoftmax:
    def test_equal_scores_are_uniform(self):
        for tau in (0.01, 1.0, 7.0):
            probs = ops.softmax(Tensor([0.3, 0.3]), tau=tau)
            np.testing.assert_allclose(probs.data, [0.5, 0.5], atol=1e-15)

    def test_known_value(self):
        probs = ops.softmax(Tensor([1.0, 0.0]), tau=1.0)
        np.testing.assert_allclose(probs.data, [0.7310586, 0.2689414], atol=1e-6)

    def test_rows_sum_to_one(self):
        scores = Tensor(np.random.default_rng(0).normal(size=(20, 7)) * 30.0)
        probs = ops.softmax(scores, tau=0.01)
        np.testing.assert_allclose(probs.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_argmax_preserved(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            s = rng.normal(size=6)
            tau = float(rng.uniform(0.01, 5.0))
            assert np.argmax(ops.softmax(Tensor(s), tau=tau).data) == np.argmax(s)

    def test_shift_invariance(self):
        s = np.random.default_rng(2).normal(size=5)
        a = ops.softmax(Tensor(s), tau=0.3).data
        b = ops.softmax(Tensor(s + 123.0), tau=0.3).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_non_positive_temperature_rejected(self, tau):
        with pytest.raises(ContractViolation):
            ops.softmax(Tensor([1.0, 2.0]), tau=tau)


class TestOpGradients:
    """Each differentiable op against central differences."""

    rng = np.random.default_rng(11)

    def check(self, fn, **arrays):
        params = {name: Tensor(value) for name, value in arrays.items()}
        error = finite_diff_check(lambda p: fn(**p), params, eps=1e-5)
        assert error < 1e-6

    def test_batched_matmul_with_broadcast(self):
        self.check(
            lambda a, b: ops.sum(ops.square(ops.matmul(a, b))),
            a=self.rng.normal(size=(2, 3, 4)),
            b=self.rng.normal(size=(4, 2)),
        )

    def test_layer_norm(self):
        self.check(
            lambda x, g, b: ops.sum(ops.mul(ops.layer_norm(x, g, b), ops.constant(np.arange(8.0)))),
            x=self.rng.normal(size=(2, 8)),
            g=self.rng.normal(size=8),
            b=self.rng.normal(size=8),
        )

    def test_gelu(self):
        self.check(lambda x: ops.sum(ops.square(ops.gelu(x))), x=self.rng.normal(size=(3, 4)))

    def test_log_softmax_with_temperature(self):
        self.check(
            lambda x: ops.sum(ops.take_along_last(ops.log_softmax(x, tau=0.5), np.array([0, 2]))),
            x=self.rng.normal(size=(2, 3)),
        )

    def test_l2_normalize(self):
        weights = ops.constant(self.rng.normal(size=(2, 5)))
        self.check(
            lambda x: ops.sum(ops.mul(ops.l2_normalize(x), weights)),
            x=self.rng.normal(size=(2, 5)),
        )

    def test_gathers_and_slices(self):
        ids = np.array([[0, 2], [2, 1]])

        def fn(table, x):
            rows = ops.take_rows(table, ids)
            picked = ops.gather_positions(x, np.array([1, 0]))
            joined = ops.concat([ops.slice_axis(rows, 1, 0, 1), ops.reshape(picked, (2, 1, 3))], 1)
            return ops.sum(ops.square(ops.transpose(joined, (1, 0, 2))))

        self.check(fn, table=self.rng.normal(size=(3, 3)), x=self.rng.normal(size=(2, 4, 3)))


def test_l2_normalize_rejects_zero_vector():
    with pytest.raises(DegenerateInputError):
        ops.l2_normalize(Tensor([0.0, 0.0]))


def test_take_rows_rejects_out_of_range_ids():
    with pytest.raises(ContractViolation):
        ops.take_rows(Tensor(np.zeros((2, 3))), np.array([2]))
