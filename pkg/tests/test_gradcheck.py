import numpy as np
import pytest

from crossprompt.exceptions import ContractViolation
from crossprompt.numeric import Tensor, finite_diff_check, finite_diff_report, ops


def test_square_at_three():
    f = lambda p: ops.sum(ops.square(p["x"]))  # noqa: E731
    assert finite_diff_check(f, {"x": Tensor([3.0])}, eps=1e-4) < 1e-8


def test_constant_function_has_zero_error():
    f = lambda p: Tensor.scalar(4.0)  # noqa: E731
    assert finite_diff_check(f, {"x": Tensor([1.0, 2.0])}) == 0.0


def test_wrong_gradient_is_detected():
    f = lambda p: ops.sum(ops.square(p["x"]))  # noqa: E731
    wrong = {"x": Tensor([1.0])}
    assert finite_diff_check(f, {"x": Tensor([3.0])}, grads=wrong) == pytest.approx(5 / 6)


def test_report_is_per_parameter():
    f = lambda p: ops.sum(ops.mul(p["a"], p["b"]))  # noqa: E731
    params = {"a": Tensor(np.array([1.0, 2.0])), "b": Tensor(np.array([3.0, -1.0]))}
    report = finite_diff_report(f, params)
    assert set(report) == {"a", "b"}
    assert max(report.values()) < 1e-8


@pytest.mark.parametrize("eps", [0.0, -1e-4])
def test_non_positive_eps_rejected(eps):
    with pytest.raises(ContractViolation):
        finite_diff_check(lambda p: ops.sum(p["x"]), {"x": Tensor([1.0])}, eps=eps)
