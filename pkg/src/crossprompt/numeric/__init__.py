"""
Numeric core: immutable float64 tensors, a reverse-mode gradient tape,
AdamW, a finite-difference oracle and a seeded random source.
"""

from . import ops
from .gradcheck import analytic_gradients, finite_diff_check, finite_diff_report
from .ops import softmax
from .optim import AdamW, OptimState, adamw_step
from .rng import Rng
from .tensor import GradTape, Tensor, backward, no_tape

__all__ = [
    "ops",
    "Tensor",
    "GradTape",
    "backward",
    "no_tape",
    "softmax",
    "AdamW",
    "OptimState",
    "adamw_step",
    "Rng",
    "analytic_gradients",
    "finite_diff_check",
    "finite_diff_report",
]
