import math

import numpy as np
import pytest

from crossprompt.exceptions import ContractViolation, DegenerateInputError
from crossprompt.numeric import Tensor
from crossprompt.training.objective import ce_loss, scores, soft_cross_entropy


class TestScores:
    def test_identical_vectors_score_one(self):
        x = Tensor([0.2, -0.7, 1.1])
        out = scores(x, Tensor([x.data]))
        assert out.data[0] == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal_vectors_score_zero(self):
        out = scores(Tensor([1.0, 0.0]), Tensor([[0.0, 3.0]]))
        assert out.data[0] == 0.0

    def test_known_value(self):
        x = Tensor(np.array([1.0, 1.0]) / math.sqrt(2))
        out = scores(x, Tensor([[1.0, 0.0]]))
        assert out.data[0] == pytest.approx(0.70711, abs=1e-5)

    def test_batched_shape(self):
        rng = np.random.default_rng(0)
        out = scores(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(5, 3))))
        assert out.shape == (4, 5)
        assert np.all(np.abs(out.data) <= 1.0 + 1e-12)

    def test_zero_feature_is_degenerate(self):
        with pytest.raises(DegenerateInputError):
            scores(Tensor([0.0, 0.0]), Tensor([[1.0, 0.0]]))

    def test_width_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            scores(Tensor([1.0, 0.0]), Tensor([[1.0, 0.0, 0.0]]))


class TestCrossEntropy:
    def test_equal_scores_give_ln2(self):
        loss = ce_loss(Tensor([[0.4, 0.4]]), np.array([1]), tau=0.01)
        assert loss.item() == pytest.approx(math.log(2), abs=1e-12)

    def test_known_value(self):
        loss = ce_loss(Tensor([[1.0, 0.0]]), np.array([0]), tau=1.0)
        assert loss.item() == pytest.approx(0.3133, abs=1e-4)
        assert loss.item() == pytest.approx(-math.log(0.7310586), abs=1e-7)

    def test_raising_true_score_lowers_loss(self):
        previous = math.inf
        for true_score in np.linspace(-1.0, 1.0, 11):
            loss = ce_loss(Tensor([[true_score, 0.2, -0.1]]), np.array([0]), tau=0.5).item()
            assert loss < previous
            previous = loss

    def test_mean_over_batch(self):
        logits = Tensor([[1.0, 0.0], [0.0, 1.0]])
        both = ce_loss(logits, np.array([0, 0]), tau=1.0).item()
        first = ce_loss(Tensor([[1.0, 0.0]]), np.array([0]), tau=1.0).item()
        second = ce_loss(Tensor([[0.0, 1.0]]), np.array([0]), tau=1.0).item()
        assert both == pytest.approx((first + second) / 2, abs=1e-15)

    @pytest.mark.parametrize(
        "labels", [np.array([2]), np.array([-1]), np.array([0.0]), np.array([0, 1])]
    )
    def test_invalid_labels_rejected(self, labels):
        with pytest.raises(ContractViolation):
            ce_loss(Tensor([[0.1, 0.2]]), labels, tau=1.0)

    def test_soft_targets_reduce_to_hard_labels(self):
        logits = Tensor([[0.3, -0.2, 0.5], [0.1, 0.0, -0.4]])
        hard = ce_loss(logits, np.array([2, 0]), tau=0.2).item()
        soft = soft_cross_entropy(logits, np.eye(3)[[2, 0]], tau=0.2).item()
        assert soft == pytest.approx(hard, abs=1e-12)
