"""
AdamW with decoupled weight decay.

    p   <- p * (1 - lr * wd)
    m_t <- b1 * m + (1 - b1) * g
    v_t <- b2 * v + (1 - b2) * g^2
    p   <- p - lr * (m_t / (1 - b1^t)) / (sqrt(v_t / (1 - b2^t)) + eps)

The update is functional: adamw_step returns new parameter tensors and a new
state; nothing passed in is mutated.
"""

import logging
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..exceptions import ContractViolation
from .tensor import Tensor

logger = logging.getLogger(__name__)


def _freeze(moments: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    for array in moments.values():
        array.flags.writeable = False
    return moments


class OptimState(BaseModel):
    """Per-parameter moments plus the shared step counter and hyperparameters."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    learning_rate: float = Field(default=2e-3, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, ge=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    step: int = Field(default=0, ge=0)
    exp_avg: Dict[str, np.ndarray] = Field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = Field(default_factory=dict)

    @field_validator("exp_avg", "exp_avg_sq")
    @classmethod
    def freeze_moments(cls, v: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        return _freeze(v)


def adamw_step(
    params: Dict[str, Tensor],
    grads: Dict[str, Tensor],
    state: OptimState,
) -> Tuple[Dict[str, Tensor], OptimState]:
    """
    Apply one AdamW update.

    Parameters without a gradient entry are carried over unchanged (and
    their moments are left alone). The step counter advances by exactly one.
    """
    for name, grad in grads.items():
        if name not in params:
            raise ContractViolation(f"gradient for unknown parameter: {name}")
        if grad.shape != params[name].shape:
            raise ContractViolation(
                f"gradient shape {grad.shape} does not match parameter {name} {params[name].shape}"
            )

    t = state.step + 1
    lr, b1, b2 = state.learning_rate, state.beta1, state.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t

    new_params: Dict[str, Tensor] = {}
    exp_avg = dict(state.exp_avg)
    exp_avg_sq = dict(state.exp_avg_sq)
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            new_params[name] = param
            continue
        p = param.data
        g = grad.data
        m = exp_avg.get(name, np.zeros_like(p))
        v = exp_avg_sq.get(name, np.zeros_like(p))
        if state.weight_decay:
            p = p * (1.0 - lr * state.weight_decay)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = Tensor._wrap(p - lr * (m_hat / (np.sqrt(v_hat) + state.eps)))
        exp_avg[name] = m
        exp_avg_sq[name] = v

    new_state = state.model_copy(update={"step": t, "exp_avg": exp_avg, "exp_avg_sq": exp_avg_sq})
    _freeze(exp_avg)
    _freeze(exp_avg_sq)
    return new_params, new_state


class AdamW:
    """Stateful convenience wrapper around adamw_step for training loops."""

    def __init__(
        self,
        learning_rate: float = 2e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.state = OptimState(
            learning_rate=learning_rate,
            beta1=betas[0],
            beta2=betas[1],
            eps=eps,
            weight_decay=weight_decay,
        )
        logger.debug(
            "AdamW lr=%s betas=%s eps=%s weight_decay=%s", learning_rate, betas, eps, weight_decay
        )

    def step(self, params: Dict[str, Tensor], grads: Dict[str, Tensor]) -> Dict[str, Tensor]:
        new_params, self.state = adamw_step(params, grads, self.state)
        return new_params
