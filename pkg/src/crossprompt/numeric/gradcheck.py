"""
Central finite-difference oracle for the gradient tape.

`f` must be deterministic: it is evaluated twice per parameter element with
one element nudged by +eps and -eps, and any run-to-run noise shows up
directly as gradient error. `f` is always called with recording disabled.
"""

import logging
from typing import Callable, Dict, Optional

import numpy as np

from ..exceptions import ContractViolation
from .tensor import GradTape, Tensor, backward, no_tape

logger = logging.getLogger(__name__)

LossFn = Callable[[Dict[str, Tensor]], Tensor]


def analytic_gradients(f: LossFn, params: Dict[str, Tensor]) -> Dict[str, Tensor]:
    """Gradients of f at params via the tape."""
    with GradTape() as tape:
        for name, tensor in params.items():
            tape.watch(tensor, name)
        loss = f(params)
    return backward(tape, loss)


def finite_diff_report(
    f: LossFn,
    params: Dict[str, Tensor],
    eps: float = 1e-5,
    grads: Optional[Dict[str, Tensor]] = None,
) -> Dict[str, float]:
    """Max relative error per parameter name."""
    if not eps > 0.0:
        raise ContractViolation(f"eps must be positive, got {eps}")
    if grads is None:
        grads = analytic_gradients(f, params)

    report: Dict[str, float] = {}
    with no_tape():
        for name, tensor in params.items():
            base = tensor.numpy()
            analytic = grads[name].data if name in grads else np.zeros_like(base)
            worst = 0.0
            for flat_index in range(base.size):
                plus = base.copy()
                plus.flat[flat_index] += eps
                minus = base.copy()
                minus.flat[flat_index] -= eps
                f_plus = f({**params, name: Tensor(plus)}).item()
                f_minus = f({**params, name: Tensor(minus)}).item()
                numeric = (f_plus - f_minus) / (2.0 * eps)
                exact = float(analytic.flat[flat_index])
                denominator = max(abs(exact), abs(numeric), 1e-12)
                worst = max(worst, abs(exact - numeric) / denominator)
            report[name] = worst
    return report


def finite_diff_check(
    f: LossFn,
    params: Dict[str, Tensor],
    eps: float = 1e-5,
    grads: Optional[Dict[str, Tensor]] = None,
) -> float:
    """
    Largest relative error between tape gradients and central differences.

    Relative error per element is |a - n| / max(|a|, |n|, 1e-12).
    """
    report = finite_diff_report(f, params, eps=eps, grads=grads)
    worst = max(report.values(), default=0.0)
    logger.debug(
        "finite_diff_check over %d parameters: max relative error %.3e", len(report), worst
    )
    return worst
