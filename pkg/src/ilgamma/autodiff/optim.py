from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Parameter


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], state: AdamState, lr: float) -> AdamState:
    """Apply one bias-corrected Adam update in place, using each ``p.grad``."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        g = p.grad
        m = state.first_moment.get(p.name)
        if m is None:
            m = np.zeros_like(p.value)
            v = np.zeros_like(p.value)
        else:
            v = state.second_moment[p.name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.first_moment[p.name] = m
        state.second_moment[p.name] = v
        p.value = p.value - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
